"""Acceptance criteria 1-9 as plain functions.

Each ``criterion_k()`` returns an :class:`Outcome` with a verdict, a one-line
detail string and deterministic CSV rows (no timings). Running this file as a
script writes every criterion's rows to ``<out>/criterion_<k>.csv``; the
acceptance tests use that to check bitwise reproducibility.
"""

from __future__ import annotations

import argparse
import csv
import functools
import io
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from contractive_inn import (
    IntervalVector, SolveConfig, random_network, solve_embedded, solve_fixed_point,
)
from contractive_inn.adversarial import AttackConfig, attack_batch
from contractive_inn.certification import certify_batch, classification_margin, certify_inclusion, certify_lipschitz, lipschitz_bound
from contractive_inn.data_io import load_mnist_idx
from contractive_inn.gradients import embedded_finite_difference_check, finite_difference_check
from contractive_inn.measures import parametrize_weight, weighted_inf_measure
from contractive_inn.model import check_wellposed, output_map
from contractive_inn.reachability import (
    brute_force_tight_inclusion, reach_inclusion, reach_lipschitz, reach_sign_split,
)
from contractive_inn.solver import contraction_factor, resolve
from contractive_inn.training import (
    TrainingConfig, init_model, objective_gradient_check, random_check_model, train,
)

ROOT = Path(__file__).resolve().parents[1]
MNIST = ROOT / "data" / "mnist_subset"
ACTIVATIONS = ("relu", "leaky_relu", "tanh", "sigmoid", "identity")


@dataclass
class Outcome:
    passed: bool
    detail: str
    header: list[str]
    rows: list[list] = field(default_factory=list)
    seconds: float = 0.0

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        w.writerows([[repr(v) if isinstance(v, float) else v for v in row] for row in self.rows])
        return buf.getvalue()


def _timed(budget: float | None):
    def wrap(fn):
        @functools.wraps(fn)
        def run():
            t0 = time.perf_counter()
            out = fn()
            out.seconds = time.perf_counter() - t0
            if budget is not None:
                ok = out.seconds <= budget
                out.detail += f"; {out.seconds:.1f} s (budget {budget:g} s)"
                out.passed = out.passed and ok
            else:
                out.detail += f"; {out.seconds:.1f} s"
            return out
        return run
    return wrap


@_timed(5.0)
def criterion_1() -> Outcome:
    rng = np.random.default_rng(1)
    rows, worst = [], -np.inf
    for k in range(1000):
        n = int(rng.integers(2, 21))
        T = rng.normal(size=(n, n)) * rng.uniform(0.1, 10.0)
        eta = np.exp(rng.normal(size=n))
        gamma = float(rng.uniform(-2.0, 0.99))
        mu = weighted_inf_measure(parametrize_weight(T, eta, gamma), eta)
        excess = mu - gamma
        worst = max(worst, excess)
        rows.append([k, n, gamma, mu, excess])
    return Outcome(worst <= 1e-9, f"max mu - gamma = {worst:.3g} (tol 1e-9)",
                   ["trial", "n", "gamma", "mu", "excess"], rows)


def _wellposed_battery(count: int, seed: int, n_max: int, r_max: int = 4, q: int = 3):
    rng = np.random.default_rng(seed)
    for k in range(count):
        n = int(rng.integers(2, n_max + 1))
        r = int(rng.integers(1, r_max + 1))
        act = ACTIVATIONS[k % len(ACTIVATIONS)]
        gamma = float(rng.uniform(-1.0, 0.95))
        net, eta = random_network(n, r, q, gamma=gamma, activation=act, seed=rng, eta_spread=0.5)
        yield k, net, eta, rng


@_timed(30.0)
def criterion_2() -> Outcome:
    rows = []
    nominal_bad = sound_bad = resid_bad = 0
    worst = -np.inf
    for k, net, eta, rng in _wellposed_battery(100, 2, 50):
        cfg = SolveConfig(eta=eta, tol=1e-11)
        _, cert, alpha = resolve(net, cfg)
        X = rng.uniform(-2.0, 2.0, (5, net.r))
        rep = solve_fixed_point(net, X, cfg)
        ratio = float(rep.contraction_estimate)
        nominal = contraction_factor(cert, alpha)
        sound = contraction_factor(cert, alpha, positive_part=True)
        resid = float(np.max(rep.residual))
        nominal_bad += ratio > nominal + 1e-6
        sound_bad += ratio > sound + 1e-6
        resid_bad += not (resid <= 1e-10 and np.all(rep.converged))
        worst = max(worst, ratio - nominal)
        rows.append([k, net.n, net.activation.kind, cert.mu, alpha, ratio, nominal, sound, resid])
    detail = (f"{nominal_bad}/100 nets exceed 1 - alpha(1 - mu) + 1e-6 (max excess {worst:.3g}); "
              f"{sound_bad}/100 exceed 1 - alpha(1 - max(mu, 0)); {resid_bad} residuals above 1e-10")
    return Outcome(nominal_bad == 0 and resid_bad == 0, detail,
                   ["net", "n", "activation", "mu", "alpha", "max_ratio", "rate_nominal", "rate_mu_plus",
                    "residual"], rows)


@functools.lru_cache(maxsize=1)
def _reach_battery():
    """Rows for criteria 3 and 4: 100 nets, 1000 box points each."""
    rows3, rows4 = [], []
    bad3 = bad4 = subset_bad = sign_conv = 0
    worst3 = worst4 = np.inf
    for k, net, eta, rng in _wellposed_battery(100, 3, 20):
        cfg = SolveConfig(eta=eta)
        center = rng.uniform(-1.0, 1.0, net.r)
        eps = float(rng.uniform(0.01, 0.5))
        box = IntervalVector.from_center(center, eps)
        inc = reach_inclusion(net, box, cfg)
        lip = reach_lipschitz(net, center, eps, cfg)
        sgn = reach_sign_split(net, box, cfg)
        X = center + rng.uniform(-eps, eps, (1000, net.r))
        Z = solve_fixed_point(net, X, cfg).z_star
        Y = output_map(net, Z)
        slack = [float(np.min(np.minimum(Y - b.lower, b.upper - Y))) for b in (inc.output_box, lip.output_box)]
        subset = True
        if sgn.converged:
            sign_conv += 1
            slack.append(float(np.min(np.minimum(Y - sgn.output_box.lower, sgn.output_box.upper - Y))))
            subset = inc.output_box.issubset(sgn.output_box, tol=1e-8)
            subset_bad += not subset
        s = min(slack)
        worst3 = min(worst3, s)
        bad3 += s < -1e-8
        efp = solve_embedded(net, box, cfg)
        s4 = float(np.min(np.minimum(Z - efp.z_lower, efp.z_upper - Z)))
        worst4 = min(worst4, s4)
        bad4 += s4 < -1e-8
        rows3.append([k, net.n, net.r, net.activation.kind, eps, slack[0], slack[1],
                      slack[2] if sgn.converged else "", int(sgn.converged), int(subset)])
        rows4.append([k, net.n, eps, s4])
    return rows3, rows4, bad3, bad4, subset_bad, sign_conv, worst3, worst4


@_timed(120.0)
def criterion_3() -> Outcome:
    rows3, _, bad3, _, subset_bad, sign_conv, worst3, _ = _reach_battery()
    detail = (f"min slack {worst3:.3g} (tol -1e-8), {bad3} nets violate; sign-split converged on "
              f"{sign_conv}/100, inclusion box outside it on {subset_bad}")
    return Outcome(bad3 == 0 and subset_bad == 0, detail,
                   ["net", "n", "r", "activation", "eps", "slack_inclusion", "slack_lipschitz", "slack_signsplit",
                    "signsplit_converged", "inclusion_in_signsplit"], rows3)


@_timed(None)
def criterion_4() -> Outcome:
    _, rows4, _, bad4, _, _, _, worst4 = _reach_battery()
    return Outcome(bad4 == 0, f"min sandwich slack {worst4:.3g} (tol -1e-8), {bad4} nets violate",
                   ["net", "n", "eps", "min_slack"], rows4)


@_timed(60.0)
def criterion_5() -> Outcome:
    rng = np.random.default_rng(5)
    rows, bad_width, bad_subset = [], 0, 0
    for k in range(50):
        n, r = int(rng.integers(1, 5)), int(rng.integers(1, 3))
        net, eta = random_network(n, r, 2, gamma=float(rng.uniform(-0.5, 0.9)),
                                  activation=ACTIVATIONS[k % 5], seed=rng, eta_spread=0.5)
        cfg = SolveConfig(eta=eta)
        box = IntervalVector.from_center(rng.uniform(-1, 1, r), float(rng.uniform(0.01, 0.5)))
        oracle = brute_force_tight_inclusion(net, box, 41, cfg).output_box
        inc = reach_inclusion(net, box, cfg).output_box
        L = lipschitz_bound(net, eta).value
        box_width = float(np.max(box.width))
        width = float(np.max(oracle.width))
        ok_w = width <= L * box_width + 1e-8
        ok_s = oracle.issubset(inc, tol=1e-8)
        bad_width += not ok_w
        bad_subset += not ok_s
        rows.append([k, n, r, L, box_width, width, float(np.max(inc.width)), int(ok_w), int(ok_s)])
    return Outcome(bad_width == 0 and bad_subset == 0,
                   f"width bound violated on {bad_width}/50, oracle outside inclusion on {bad_subset}/50",
                   ["net", "n", "r", "lipschitz", "box_width", "oracle_width", "inclusion_width",
                    "width_ok", "subset_ok"], rows)


@_timed(60.0)
def criterion_6() -> Outcome:
    """20 kink-free draws per check kind; near-kink draws are resampled and counted."""
    rng = np.random.default_rng(6)
    rows, worst, resampled = [], 0.0, 0

    def battery(name, make):
        nonlocal worst, resampled
        done = 0
        while done < 20:
            rep = make(ACTIVATIONS[done % 5])
            if rep.excluded:
                resampled += 1
                continue
            worst = max(worst, rep.max_rel_error)
            rows.append([name, done, ACTIVATIONS[done % 5], rep.max_rel_error])
            done += 1

    def plain(act):
        tm = random_check_model(rng, activation=act)
        return finite_difference_check(tm.materialize(), rng.normal(size=2), int(rng.integers(3)),
                                       cfg=tm.solve_config(), skip_excluded=True)

    def embedded(act):
        tm = random_check_model(rng, activation=act)
        x = rng.normal(size=2)
        return embedded_finite_difference_check(tm.materialize(), (x - 0.1, x + 0.1), rng.normal(size=3),
                                                rng.normal(size=3), cfg=tm.solve_config(), skip_excluded=True)

    def objective(algo):
        def make(act):
            tm = random_check_model(rng, activation=act)
            tm.log_eta = rng.normal(scale=0.3, size=tm.log_eta.shape)
            batch = (rng.normal(size=(4, 2)), rng.integers(0, 3, 4))
            return objective_gradient_check(tm, batch, algo, skip_excluded=True)
        return make

    battery("plain", plain)
    battery("embedded", embedded)
    battery("lipschitz_objective", objective("lipschitz"))
    battery("inclusion_objective", objective("inclusion"))
    return Outcome(worst <= 1e-4, f"max relative error {worst:.3g} over 80 checks (tol 1e-4), "
                                  f"{resampled} near-kink draws resampled",
                   ["check", "index", "activation", "max_rel_error"], rows)


EPS_SWEEP = (0.0, 0.01, 0.02, 0.05, 0.1)


def mnist_configs() -> dict[str, TrainingConfig]:
    common = dict(epochs=10, batch_size=100, learning_rate=1e-3, lr_drop=None, seed=0)
    return {
        "nominal": TrainingConfig(algo="lipschitz", lam=0.0, **common),
        "lipschitz": TrainingConfig(algo="lipschitz", lam=1e-5, **common),
        "inclusion": TrainingConfig(algo="inclusion", kappa_nom=0.75, eps_test=0.05, ramp=(3, 7), **common),
    }


@functools.lru_cache(maxsize=1)
def _mnist_runs():
    """Train the three models and evaluate certification and PGD on the test subset.

    Returns ``(runs, labels, seconds)``; criteria 7 and 9 share this work.
    """
    t0 = time.perf_counter()
    train_set = load_mnist_idx(MNIST / "train-images-idx3-ubyte.gz", MNIST / "train-labels-idx1-ubyte.gz")
    test_set = load_mnist_idx(MNIST / "test-images-idx3-ubyte.gz", MNIST / "test-labels-idx1-ubyte.gz")
    X, y = test_set.inputs, test_set.labels
    out = {}
    for name, cfg in mnist_configs().items():
        model = init_model(50, 784, 10, gamma=0.0, activation="relu", seed=0)
        report = train(model, train_set, cfg)
        net, eta = model.materialize(), model.eta
        scfg = SolveConfig(eta=eta)
        cert, fooled = {}, {}
        logits = output_map(net, solve_fixed_point(net, X, scfg).z_star)
        fooled["clean"] = ~(classification_margin(logits, y) > 0)
        for e in EPS_SWEEP:
            for method in ("lipschitz", "inclusion"):
                cert[method, e] = np.array([c.certified for c in certify_batch(net, eta, X, y, e, method, scfg)])
            fooled[e] = attack_batch(net, X, y, AttackConfig("pgd", e), scfg).fooled
        out[name] = (report, net, eta, cert, fooled)
    return out, y, time.perf_counter() - t0


@_timed(None)
def criterion_7() -> Outcome:
    runs, _, _ = _mnist_runs()
    rows, violations = [], 0
    for name, (_, _, _, cert, fooled) in runs.items():
        for e in EPS_SWEEP:
            for method in ("lipschitz", "inclusion"):
                v = int(np.sum(cert[method, e] & fooled[e]))
                violations += v
                rows.append([name, method, e, int(cert[method, e].sum()), int(fooled[e].sum()), v])
    return Outcome(violations == 0, f"{violations} certified samples broken by PGD over 3 models x "
                                    f"{len(EPS_SWEEP)} radii x 2 methods",
                   ["model", "method", "eps", "certified", "pgd_fooled", "violations"], rows)


@_timed(None)
def criterion_8() -> Outcome:
    from contractive_inn import ImplicitNetwork

    net = ImplicitNetwork.from_arrays([[0.0]], [[1.0]], C=[[1.0], [-1.0]], activation="identity")
    rows, ok = [], True
    for method, fn in (("lipschitz", certify_lipschitz), ("inclusion", certify_inclusion)):
        for e in (0.0, 0.5, 1.0, 1.0 + 1e-6, 1.5):
            c = fn(net, None, [1.0], 0, e)
            expected = e <= 1.0
            ok &= c.certified == expected
            if e == 1.0:
                ok &= abs(c.margin) <= 1e-9
            rows.append([method, e, c.margin, int(c.certified)])
    return Outcome(bool(ok), "certified exactly for eps <= 1 under both bounds, |margin(1)| <= 1e-9" if ok
                   else "radius-one boundary not reproduced", ["method", "eps", "margin", "certified"], rows)


def _curve(flags: np.ndarray) -> float:
    return float(np.mean(flags))


@_timed(None)
def criterion_9() -> Outcome:
    runs, y, seconds = _mnist_runs()
    rows = []
    frac = {}
    for name, (report, net, eta, cert, fooled) in runs.items():
        alive = ~fooled["clean"]
        for e in EPS_SWEEP:
            alive &= ~fooled[e]
            emp = _curve(alive)
            for method in ("lipschitz", "inclusion"):
                frac[name, method, e] = _curve(cert[method, e])
                rows.append([name, method, e, frac[name, method, e], emp])
            frac[name, "pgd", e] = emp
        rows.append([name, "train_accuracy", 0.0, report.epochs[-1].accuracy, ""])
    inc_ok = frac["inclusion", "inclusion", 0.05] > frac["nominal", "inclusion", 0.05]
    lip_ok = frac["lipschitz", "lipschitz", 0.05] > frac["nominal", "lipschitz", 0.05]
    sound_ok = all(frac[m, meth, e] <= frac[m, "pgd", e]
                   for m in runs for meth in ("lipschitz", "inclusion") for e in EPS_SWEEP)
    budget_ok = seconds <= 1200.0
    detail = (f"inclusion-cert@0.05 incl-trained {frac['inclusion', 'inclusion', 0.05]:.3f} vs nominal "
              f"{frac['nominal', 'inclusion', 0.05]:.3f} ({'ok' if inc_ok else 'FAIL'}); "
              f"lipschitz-cert@0.05 lip-trained {frac['lipschitz', 'lipschitz', 0.05]:.3f} vs nominal "
              f"{frac['nominal', 'lipschitz', 0.05]:.3f} ({'ok' if lip_ok else 'FAIL'}); "
              f"certified <= PGD everywhere: {sound_ok}; training and evaluation {seconds:.0f} s (budget 1200 s)")
    return Outcome(inc_ok and lip_ok and sound_ok and budget_ok, detail,
                   ["model", "method", "eps", "certified_fraction", "pgd_fraction"], rows)


CRITERIA = {k: globals()[f"criterion_{k}"] for k in range(1, 10)}


def run_all(out_dir: Path | None = None) -> dict[int, Outcome]:
    results = {}
    for k, fn in CRITERIA.items():
        results[k] = fn()
        if out_dir is not None:
            (Path(out_dir) / f"criterion_{k}.csv").write_text(results[k].csv_text(), encoding="utf-8", newline="")
    return results


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", required=True, help="directory for criterion_<k>.csv files")
    args = p.parse_args(argv)
    Path(args.out).mkdir(parents=True, exist_ok=True)
    for k, res in run_all(Path(args.out)).items():
        print(f"criterion {k}: {'PASS' if res.passed else 'FAIL'}: {res.detail}", flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
