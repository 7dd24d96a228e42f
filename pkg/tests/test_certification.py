import numpy as np
import pytest

from contractive_inn import (
    ImplicitNetwork, InvalidInputError, PositiveWeights, SolveConfig, WellPosednessError, random_network,
)
from contractive_inn.certification import (
    certified_fraction_curve, certify_batch, certify_inclusion, certify_lipschitz, classification_margin,
    lipschitz_bound, m_lower, predict_labels, spec_matrix,
)
from contractive_inn.model import output_map
from contractive_inn.solver import solve_embedded, solve_fixed_point


class TestLipschitzBound:
    def test_unit_case(self):
        net = ImplicitNetwork.from_arrays([[0.0]], [[1.0]])
        b = lipschitz_bound(net)
        assert (b.value, b.eta_ratio, b.u_norm, b.c_norm, b.mu_plus) == (1.0, 1.0, 1.0, 1.0, 0.0)

    def test_eta_ratio(self):
        net = ImplicitNetwork.from_arrays(np.zeros((2, 2)), np.eye(2))
        assert lipschitz_bound(net, [1.0, 4.0]).eta_ratio == 4.0

    def test_refusal(self):
        with pytest.raises(WellPosednessError):
            lipschitz_bound(ImplicitNetwork.from_arrays([[1.5]], [[1.0]]))

    def test_sampled_soundness(self, rng):
        for kind in ("relu", "tanh", "identity"):
            net, eta = random_network(5, 3, 3, gamma=0.5, activation=kind, seed=rng, eta_spread=0.5)
            bound = lipschitz_bound(net, eta).value
            X = rng.uniform(-2, 2, (5000, 3))
            Y = X + rng.uniform(-0.5, 0.5, (5000, 3))
            cfg = SolveConfig(eta=eta)
            fx = output_map(net, solve_fixed_point(net, X, cfg).z_star)
            fy = output_map(net, solve_fixed_point(net, Y, cfg).z_star)
            lhs = np.abs(fx - fy).max(axis=1)
            assert np.all(lhs <= bound * np.abs(X - Y).max(axis=1) + 1e-9)


class TestSpecification:
    def test_examples(self):
        np.testing.assert_array_equal(spec_matrix(0, 2).matrix, [[0, 0], [1, -1]])
        np.testing.assert_array_equal(spec_matrix(1, 3).matrix, [[-1, 1, 0], [0, 0, 0], [0, 1, -1]])

    def test_self_difference(self, rng):
        f = rng.normal(size=5)
        for lab in range(5):
            m = spec_matrix(lab, 5).matrix @ f
            assert m[lab] == 0.0
            np.testing.assert_allclose(m, f[lab] - f)

    @pytest.mark.parametrize("label", [-1, 3, 1.5])
    def test_out_of_range(self, label):
        with pytest.raises(InvalidInputError):
            spec_matrix(label, 3)


class TestMargins:
    def test_ties_go_to_smallest_index_and_count_as_wrong(self):
        logits = np.array([[1.0, 1.0, 0.0]])
        assert predict_labels(logits)[0] == 0
        assert classification_margin(logits, [0])[0] == 0.0


class TestIdentityExample:
    """f(x) = (x, -x): exact robustness radius at x = 1 is one."""

    @pytest.mark.parametrize("eps, certified", [(0.0, True), (0.5, True), (1.0, True), (1.0 + 1e-9, False), (2.0, False)])
    def test_both_methods(self, identity_pair, eps, certified):
        lip = certify_lipschitz(identity_pair, None, [1.0], 0, eps)
        inc = certify_inclusion(identity_pair, None, [1.0], 0, eps)
        assert lip.certified == certified and inc.certified == certified
        assert lip.margin == pytest.approx(2.0 - 2.0 * eps, abs=1e-12)
        assert inc.margin == pytest.approx(2.0 - 2.0 * eps, abs=1e-12)

    @pytest.mark.parametrize("eps, expected", [(0.5, [0.0, 1.0]), (1.0, [0.0, 0.0])])
    def test_m_lower(self, identity_pair, eps, expected):
        efp = solve_embedded(identity_pair, ([1.0 - eps], [1.0 + eps]))
        np.testing.assert_allclose(m_lower(identity_pair, spec_matrix(0, 2), efp), expected, atol=1e-15)

    def test_misclassified_never_certified(self, identity_pair):
        for method in (certify_lipschitz, certify_inclusion):
            assert not method(identity_pair, None, [1.0], 1, 0.0).certified


class TestCertification:
    def test_degenerate_box_m_lower(self, small_net, rng):
        net, eta = small_net
        cfg = SolveConfig(eta=eta)
        x = rng.normal(size=net.r)
        efp = solve_embedded(net, (x, x), cfg)
        f = output_map(net, solve_fixed_point(net, x, cfg).z_star)
        spec = spec_matrix(1, net.q)
        np.testing.assert_allclose(m_lower(net, spec, efp), spec.matrix @ f, atol=1e-9)

    def test_m_lower_sound(self, small_net, rng):
        net, eta = small_net
        cfg = SolveConfig(eta=eta)
        x = rng.normal(size=net.r)
        efp = solve_embedded(net, (x - 0.2, x + 0.2), cfg)
        spec = spec_matrix(2, net.q)
        low = m_lower(net, spec, efp)
        X = x + rng.uniform(-0.2, 0.2, (1000, net.r))
        M = output_map(net, solve_fixed_point(net, X, cfg).z_star) @ spec.matrix.T
        assert np.all(M >= low - 1e-8)

    def test_lipschitz_margin_at_zero(self, small_net, rng):
        net, eta = small_net
        x = rng.normal(size=net.r)
        f = output_map(net, solve_fixed_point(net, x, SolveConfig(eta=eta)).z_star)
        cert = certify_lipschitz(net, eta, x, 0, 0.0)
        assert cert.margin == pytest.approx(classification_margin(f, [0])[0], abs=1e-9)

    def test_batch_matches_single(self, small_net, rng):
        net, eta = small_net
        X = rng.normal(size=(6, net.r))
        labels = predict_labels(output_map(net, solve_fixed_point(net, X, SolveConfig(eta=eta)).z_star))
        for method, single in (("lipschitz", certify_lipschitz), ("inclusion", certify_inclusion)):
            batch = certify_batch(net, eta, X, labels, 0.05, method)
            for i, c in enumerate(batch):
                s = single(net, eta, X[i], labels[i], 0.05, sample_id=i)
                assert c.certified == s.certified
                assert c.margin == pytest.approx(s.margin, abs=1e-12)

    def test_curve_monotone_and_clean_accuracy(self, rng):
        net, eta = random_network(6, 2, 3, gamma=0.2, activation="relu", seed=3, eta_spread=0.2)
        X = rng.uniform(-1, 1, (200, 2))
        logits = output_map(net, solve_fixed_point(net, X, SolveConfig(eta=eta)).z_star)
        labels = rng.integers(0, 3, 200)
        labels[:150] = predict_labels(logits)[:150]
        acc = np.mean(classification_margin(logits, labels) > 0)
        eps = [0.0, 0.01, 0.05, 0.1, 0.5, 1e6]
        for method in ("lipschitz", "inclusion"):
            curve = certified_fraction_curve(net, eta, X, labels, eps, method)
            vals = [curve[e] for e in eps]
            assert vals[0] == acc
            assert all(a >= b for a, b in zip(vals, vals[1:]))
            assert vals[-1] == 0.0

    def test_inclusion_usually_dominates_lipschitz(self, rng):
        wins = total = 0
        for _ in range(30):
            net, eta = random_network(3, 2, 2, gamma=0.3, activation="tanh", seed=rng, eta_spread=0.3)
            x = rng.uniform(-1, 1, 2)
            lab = int(predict_labels(output_map(net, solve_fixed_point(net, x, SolveConfig(eta=eta)).z_star))[0])
            for eps in (0.01, 0.05, 0.1):
                if certify_lipschitz(net, eta, x, lab, eps).certified:
                    total += 1
                    wins += certify_inclusion(net, eta, x, lab, eps).certified
        assert total > 0 and wins / total >= 0.99

    def test_bad_inputs(self, small_net):
        net, eta = small_net
        with pytest.raises(InvalidInputError):
            certify_batch(net, eta, np.zeros((2, net.r)), [0], 0.1, "lipschitz")
        with pytest.raises(InvalidInputError):
            certify_batch(net, eta, np.zeros((1, net.r)), [0], -0.1, "lipschitz")
        with pytest.raises(InvalidInputError):
            certify_batch(net, eta, np.zeros((1, net.r)), [0], 0.1, "smoothing")
