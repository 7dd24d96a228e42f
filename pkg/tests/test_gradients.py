import numpy as np
import pytest
from hypothesis import given, strategies as st

from contractive_inn import ImplicitNetwork, SolveConfig, random_network
from contractive_inn.gradients import (
    embedded_finite_difference_check, embedded_vjp, finite_difference_check, fixed_point_vjp,
    loss_and_input_gradient, nominal_loss_gradients, relative_error,
)
from contractive_inn.solver import contraction_factor, resolve, solve_embedded, solve_fixed_point

from conftest import ACTIVATION_KINDS

FD_THRESHOLD = 1e-4


class TestClosedForm:
    def test_scalar_relu(self, scalar_relu):
        z = solve_fixed_point(scalar_relu, [1.0], SolveConfig(tol=1e-13)).z_star
        g = fixed_point_vjp(scalar_relu, [1.0], z, [1.0])
        np.testing.assert_allclose(g.d_x, [2.0], atol=1e-11)
        np.testing.assert_allclose(g.d_b, [2.0], atol=1e-11)
        np.testing.assert_allclose(g.d_W, [[4.0]], atol=1e-10)
        np.testing.assert_allclose(g.d_U, [[2.0]], atol=1e-11)

    def test_inactive_relu_gives_zero(self, scalar_relu):
        z = solve_fixed_point(scalar_relu, [-1.0]).z_star
        g = fixed_point_vjp(scalar_relu, [-1.0], z, [1.0])
        for arr in (g.d_x, g.d_b, g.d_W, g.d_U):
            assert np.all(arr == 0.0)

    def test_zero_readout_gives_zero_input_gradient(self, rng):
        net, eta = random_network(4, 3, 3, gamma=0.3, activation="tanh", seed=rng)
        net = ImplicitNetwork.from_arrays(net.W, net.U, net.b, np.zeros((3, 4)), net.c, "tanh")
        _, d_x = loss_and_input_gradient(net, rng.normal(size=3), 1, SolveConfig(eta=eta))
        assert np.all(d_x == 0.0)

    def test_rejects_non_fixed_point(self, scalar_relu):
        from contractive_inn import ConvergenceError

        with pytest.raises(ConvergenceError):
            fixed_point_vjp(scalar_relu, [1.0], [0.0], [1.0])


@pytest.mark.parametrize("kind", ACTIVATION_KINDS)
def test_finite_differences(kind):
    rng = np.random.default_rng(hash(kind) % 2**32)
    for _ in range(4):
        net, eta = random_network(3, 2, 3, gamma=0.5, activation=kind, seed=rng, eta_spread=0.3)
        x = rng.normal(size=2)
        rep = finite_difference_check(net, x, int(rng.integers(3)), cfg=SolveConfig(eta=eta))
        assert rep.passed(FD_THRESHOLD), rep


@pytest.mark.parametrize("kind", ACTIVATION_KINDS)
def test_embedded_finite_differences(kind):
    rng = np.random.default_rng(hash(kind) % 2**32 + 1)
    for _ in range(4):
        net, eta = random_network(3, 2, 3, gamma=0.5, activation=kind, seed=rng, eta_spread=0.3)
        x = rng.normal(size=2)
        box = (x - 0.1, x + 0.1)
        rep = embedded_finite_difference_check(net, box, rng.normal(size=3), rng.normal(size=3),
                                               cfg=SolveConfig(eta=eta))
        assert rep.passed(FD_THRESHOLD), rep


def test_embedded_reduces_to_plain_on_degenerate_box(small_net, rng):
    net, eta = small_net
    cfg = SolveConfig(eta=eta, tol=1e-13)
    x = rng.normal(size=net.r)
    v = rng.normal(size=net.n)
    efp = solve_embedded(net, (x, x), cfg)
    emb = embedded_vjp(net, (x, x), efp, v, np.zeros(net.n), cfg)
    emb2 = embedded_vjp(net, (x, x), efp, np.zeros(net.n), v, cfg)
    plain = fixed_point_vjp(net, x, solve_fixed_point(net, x, cfg).z_star, v, cfg)
    both = emb.d_x_lower + emb.d_x_upper
    np.testing.assert_allclose(both, plain.d_x, atol=1e-9)
    np.testing.assert_allclose(emb2.d_x, plain.d_x, atol=1e-9)


@given(a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_vjp_linear_in_cotangent(a, b):
    net, eta = random_network(4, 2, 2, gamma=0.3, activation="sigmoid", seed=11, eta_spread=0.2)
    cfg = SolveConfig(eta=eta, tol=1e-13)
    x = np.array([0.3, -0.4])
    z = solve_fixed_point(net, x, cfg).z_star
    v1, v2 = np.array([1.0, 0.0, -1.0, 2.0]), np.array([0.5, 1.0, 0.0, -1.0])
    g = fixed_point_vjp(net, x, z, a * v1 + b * v2, cfg)
    g1 = fixed_point_vjp(net, x, z, v1, cfg)
    g2 = fixed_point_vjp(net, x, z, v2, cfg)
    np.testing.assert_allclose(g.d_x, a * g1.d_x + b * g2.d_x, atol=1e-10)
    np.testing.assert_allclose(g.d_W, a * g1.d_W + b * g2.d_W, atol=1e-10)


def test_batch_gradients_are_sums(small_net, rng):
    net, eta = small_net
    cfg = SolveConfig(eta=eta)
    X = rng.normal(size=(5, net.r))
    labels = rng.integers(0, net.q, 5)
    total, grads, _ = nominal_loss_gradients(net, X, labels, cfg)
    parts = [nominal_loss_gradients(net, X[i:i + 1], labels[i:i + 1], cfg) for i in range(5)]
    assert total == pytest.approx(sum(p[0] for p in parts), rel=1e-12)
    for name in ("W", "U", "b", "C", "c"):
        summed = sum(p[1].params()[name] for p in parts)
        assert relative_error(grads.params()[name], summed) < 1e-10


def test_adjoint_ratio_within_contraction_bound(rng):
    for kind in ACTIVATION_KINDS:
        net, eta = random_network(6, 3, 2, gamma=0.5, activation=kind, seed=rng, eta_spread=0.3)
        cfg = SolveConfig(eta=eta)
        _, cert, alpha = resolve(net, cfg)
        x = rng.normal(size=3)
        z = solve_fixed_point(net, x, cfg).z_star
        g = fixed_point_vjp(net, x, z, rng.normal(size=6), cfg)
        assert g.diagnostics["adjoint_ratio"] <= contraction_factor(cert, alpha, positive_part=True) + 1e-6
