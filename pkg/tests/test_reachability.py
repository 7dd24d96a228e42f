import numpy as np
import pytest

from contractive_inn import (
    BudgetError, ImplicitNetwork, IntervalVector, InvalidInputError, SolveConfig, random_network,
)
from contractive_inn.model import output_map
from contractive_inn.reachability import (
    brute_force_tight_inclusion, grid_points, reach_inclusion, reach_lipschitz, reach_sign_split,
)
from contractive_inn.solver import solve_fixed_point

from conftest import ACTIVATION_KINDS


def neg_identity():
    return ImplicitNetwork.from_arrays([[0.0]], [[-1.0]], activation="identity")


class TestIntervalVector:
    def test_validation(self):
        with pytest.raises(InvalidInputError):
            IntervalVector([1.0], [0.0])
        with pytest.raises(InvalidInputError):
            IntervalVector([0.0, 1.0], [1.0])
        with pytest.raises(InvalidInputError):
            IntervalVector([np.nan], [1.0])
        with pytest.raises(InvalidInputError):
            IntervalVector.from_center([0.0], -1.0)

    def test_contains_and_subset(self):
        box = IntervalVector([0.0, 0.0], [1.0, 2.0])
        assert box.contains([0.5, 2.0])
        assert not box.contains([1.5, 0.0])
        np.testing.assert_array_equal(box.contains([[0.5, 0.5], [3.0, 0.0]]), [True, False])
        assert IntervalVector([0.2, 0.2], [0.5, 1.0]).issubset(box)
        np.testing.assert_array_equal(box.width, [1.0, 2.0])

    def test_grid_includes_corners(self):
        pts = grid_points(IntervalVector([0.0, -1.0], [1.0, 1.0]), 3)
        assert pts.shape == (9, 2)
        for corner in ([0, -1], [0, 1], [1, -1], [1, 1]):
            assert any(np.array_equal(p, corner) for p in pts)


class TestInclusion:
    def test_negative_input_weight(self):
        res = reach_inclusion(neg_identity(), IntervalVector([0.0], [1.0]))
        assert res.method == "metzler_inclusion"
        np.testing.assert_array_equal(res.output_box.lower, [-1.0])
        np.testing.assert_array_equal(res.output_box.upper, [0.0])

    def test_scalar_relu(self, scalar_relu):
        res = reach_inclusion(scalar_relu, IntervalVector([0.0], [1.0]))
        np.testing.assert_allclose([res.output_box.lower[0], res.output_box.upper[0]], [0.0, 2.0], atol=2e-10)

    def test_degenerate_box(self, small_net, rng):
        net, eta = small_net
        x = rng.normal(size=net.r)
        cfg = SolveConfig(eta=eta)
        res = reach_inclusion(net, IntervalVector.point(x), cfg)
        f = output_map(net, solve_fixed_point(net, x, cfg).z_star)
        np.testing.assert_allclose(res.output_box.lower, f, atol=1e-9)
        np.testing.assert_allclose(res.output_box.upper, f, atol=1e-9)

    def test_rejects_unbounded_and_wrong_dimension(self, scalar_relu):
        with pytest.raises(InvalidInputError):
            reach_inclusion(scalar_relu, IntervalVector([-np.inf], [0.0]))
        with pytest.raises(InvalidInputError):
            reach_inclusion(scalar_relu, IntervalVector([0.0, 0.0], [1.0, 1.0]))

    def test_nesting(self, small_net, rng):
        net, eta = small_net
        cfg = SolveConfig(eta=eta)
        x = rng.normal(size=net.r)
        inner = reach_inclusion(net, IntervalVector.from_center(x, 0.1), cfg).output_box
        outer = reach_inclusion(net, IntervalVector.from_center(x + 0.05, 0.2), cfg).output_box
        assert inner.issubset(outer, tol=1e-9)


class TestLipschitzBall:
    def test_examples(self, scalar_relu):
        ident = ImplicitNetwork.from_arrays([[0.0]], [[1.0]], activation="identity")
        res = reach_lipschitz(ident, [0.7], 0.3)
        np.testing.assert_allclose([res.output_box.lower[0], res.output_box.upper[0]], [0.4, 1.0], atol=1e-15)
        res = reach_lipschitz(scalar_relu, [1.0], 1.0)
        assert res.diagnostics["lipschitz"] == 2.0
        np.testing.assert_allclose(res.output_box.width, [4.0])

    def test_zero_radius(self, small_net, rng):
        net, eta = small_net
        res = reach_lipschitz(net, rng.normal(size=net.r), 0.0, SolveConfig(eta=eta))
        np.testing.assert_array_equal(res.output_box.lower, res.output_box.upper)


class TestSignSplit:
    def test_coincides_for_nonnegative_weights(self, rng):
        W = rng.uniform(0, 0.2, (3, 3))
        net = ImplicitNetwork.from_arrays(W, rng.normal(size=(3, 2)), activation="tanh")
        box = IntervalVector([-1.0, 0.0], [0.0, 0.5])
        a = reach_inclusion(net, box).output_box
        b = reach_sign_split(net, box).output_box
        np.testing.assert_array_equal(a.lower, b.lower)
        np.testing.assert_array_equal(a.upper, b.upper)

    def test_scalar_conservatism(self):
        net = ImplicitNetwork.from_arrays([[-0.5]], [[1.0]], activation="identity")
        box = IntervalVector([0.0], [1.0])
        m = reach_inclusion(net, box).output_box
        s = reach_sign_split(net, box).output_box
        assert m.issubset(s) and s.width[0] > m.width[0]

    def test_divergence_gives_unbounded_box(self):
        W = np.array([[-1.0, -1.35], [-1.35, -1.0]])
        net = ImplicitNetwork.from_arrays(W, np.eye(2), activation="identity")
        res = reach_sign_split(net, IntervalVector([0.0, 0.0], [1.0, 1.0]))
        assert not res.converged and res.method == "sign_split"
        assert np.all(np.isinf(res.output_box.width))


class TestBruteForce:
    def test_monotone_example(self):
        res = brute_force_tight_inclusion(neg_identity(), IntervalVector([0.0], [1.0]), 11)
        np.testing.assert_array_equal(res.output_box.lower, [-1.0])
        np.testing.assert_array_equal(res.output_box.upper, [0.0])

    def test_budget(self):
        net = ImplicitNetwork.from_arrays(np.zeros((2, 2)), np.ones((2, 8)))
        with pytest.raises(BudgetError):
            brute_force_tight_inclusion(net, IntervalVector(np.zeros(8), np.ones(8)), 11)

    @pytest.mark.parametrize("kind", ACTIVATION_KINDS)
    def test_ordering_and_soundness(self, kind, rng):
        net, eta = random_network(3, 2, 2, gamma=0.4, activation=kind, seed=rng, eta_spread=0.3)
        cfg = SolveConfig(eta=eta)
        x0 = rng.uniform(-1, 1, 2)
        box = IntervalVector.from_center(x0, 0.3)
        oracle = brute_force_tight_inclusion(net, box, 15, cfg).output_box
        inc = reach_inclusion(net, box, cfg).output_box
        lip = reach_lipschitz(net, x0, 0.3, cfg).output_box
        assert oracle.issubset(inc, 1e-8) and oracle.issubset(lip, 1e-8)
        sign = reach_sign_split(net, box, cfg)
        if sign.converged:
            assert inc.issubset(sign.output_box, 1e-8)
        X = x0 + rng.uniform(-0.3, 0.3, (1000, 2))
        Y = output_map(net, solve_fixed_point(net, X, cfg).z_star)
        assert np.all(inc.contains(Y, 1e-8)) and np.all(lip.contains(Y, 1e-8))
