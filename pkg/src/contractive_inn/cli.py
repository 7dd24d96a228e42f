"""``contractive-inn`` command-line interface.

Exit status: 0 on success, 1 when the input is rejected (bad flags, invalid
files, ill-posed models, refused computations), 2 on unexpected errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .adversarial import AttackConfig, empirical_robust_fraction
from .certification import certified_fraction_curve, certify_batch, lipschitz_bound
from .data_io import (
    as_network, load_dataset, load_model, load_training_config, save_model, write_certificates, write_results,
)
from .exceptions import ContractiveINNError, InvalidInputError
from .measures import PositiveWeights
from .model import check_wellposed, output_map, random_network, suggest_eta
from .reachability import (
    IntervalVector, brute_force_tight_inclusion, reach_inclusion, reach_lipschitz, reach_sign_split,
)
from .solver import SolveConfig, solve_fixed_point

log = logging.getLogger("contractive_inn")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# --------------------------------------------------------------------------
# argument helpers


def _floats(text: str) -> np.ndarray:
    """Comma/space separated numbers, or a path to a ``.npy`` / text file of numbers."""
    p = Path(text)
    if p.suffix in (".npy", ".txt", ".csv", ".json") and p.exists():
        if p.suffix == ".npy":
            return np.load(p).astype(np.float64).reshape(-1)
        if p.suffix == ".json":
            return np.asarray(json.loads(p.read_text()), dtype=np.float64).reshape(-1)
        text = p.read_text()
    try:
        vals = [float(t) for t in text.replace(",", " ").split()]
    except ValueError:
        raise InvalidInputError(f"could not parse numbers from {text!r}") from None
    if not vals:
        raise InvalidInputError("empty numeric list")
    return np.asarray(vals, dtype=np.float64)


def _eps_list(text: str) -> list[float]:
    vals = _floats(text)
    if np.any(~np.isfinite(vals)) or np.any(vals < 0):
        raise InvalidInputError("every eps must be finite and >= 0")
    return sorted({float(v) for v in vals})


def _sizes(text: str) -> list[int]:
    vals = _floats(text)
    if np.any(vals != np.round(vals)) or np.any(vals < 1):
        raise InvalidInputError("sizes must be positive integers")
    return [int(v) for v in vals]


def _load_net(args):
    """Load the model and resolve weights: model file, then ``--eta``, then ones."""
    model, file_eta = load_model(args.model)
    net = as_network(model)
    flag = getattr(args, "eta", None)
    if file_eta is not None:
        if flag is not None:
            log.warning("model file provides eta; ignoring --eta %s", flag)
        return net, file_eta
    if flag is None or flag == "ones":
        return net, PositiveWeights.ones(net.n)
    if flag == "auto":
        return net, suggest_eta(net.W)
    vals = _floats(flag)
    if vals.shape[0] != net.n:
        raise InvalidInputError(f"--eta has {vals.shape[0]} entries, model has n={net.n}")
    return net, PositiveWeights(vals)


def _solve_cfg(args, eta) -> SolveConfig:
    return SolveConfig(alpha=args.alpha, tol=args.tol, max_iter=args.max_iter, eta=eta)


def _fmt_vec(v) -> str:
    return " ".join(repr(float(x)) for x in np.atleast_1d(v))


def _metadata(args) -> str | None:
    if not getattr(args, "metadata", False):
        return None
    stamp = time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime())
    return f"generated {stamp} by contractive-inn {__version__}"


def _clip(args):
    return (0.0, 1.0) if getattr(args, "clip", False) else None


# --------------------------------------------------------------------------
# subcommands


def cmd_check(args) -> int:
    net, eta = _load_net(args)
    cert = check_wellposed(net, eta)
    print(f"mu = {cert.mu!r}")
    print(f"wellposed = {str(cert.wellposed).lower()}")
    print(f"alpha_max = {cert.alpha_max!r}")
    print(f"eta = {_fmt_vec(eta.eta)}")
    if cert.wellposed:
        print(f"lipschitz_bound = {lipschitz_bound(net, eta).value!r}")
        return 0
    print("refused: weighted measure is not below one", file=sys.stderr)
    return 1


def cmd_solve(args) -> int:
    net, eta = _load_net(args)
    x = _floats(args.input)
    rep = solve_fixed_point(net, x, _solve_cfg(args, eta))
    print(f"z_star = {_fmt_vec(rep.z_star)}")
    print(f"output = {_fmt_vec(output_map(net, rep.z_star))}")
    print(f"iterations = {rep.iterations}")
    print(f"residual = {rep.residual!r}")
    print(f"converged = {str(rep.converged).lower()}")
    return 0 if rep.converged else 1


def cmd_reach(args) -> int:
    net, eta = _load_net(args)
    center = _floats(args.center)
    cfg = _solve_cfg(args, eta)
    box = IntervalVector.from_center(center, args.eps)
    if args.method == "inclusion":
        res = reach_inclusion(net, box, cfg)
    elif args.method == "lipschitz":
        res = reach_lipschitz(net, center, args.eps, cfg)
    elif args.method == "signsplit":
        res = reach_sign_split(net, box, cfg)
    else:
        res = brute_force_tight_inclusion(net, box, args.grid, cfg)
    print(f"method = {res.method}")
    print(f"lower = {_fmt_vec(res.output_box.lower)}")
    print(f"upper = {_fmt_vec(res.output_box.upper)}")
    print(f"converged = {str(res.converged).lower()}")
    return 0


def cmd_certify(args) -> int:
    net, eta = _load_net(args)
    ds = load_dataset(args.data)
    ds.check_classes(net.q)
    cfg = _solve_cfg(args, eta)
    eps_list = _eps_list(args.eps_list)
    curve = certified_fraction_curve(net, eta, ds.inputs, ds.labels, eps_list, args.method, cfg, _clip(args))
    model_id = args.model_id or Path(args.model).stem
    write_results(curve, args.out, args.method, model_id, _metadata(args))
    if args.certificates:
        certs = []
        for e in eps_list:
            certs.extend(certify_batch(net, eta, ds.inputs, ds.labels, e, args.method, cfg, _clip(args)))
        write_certificates(certs, args.certificates, _metadata(args))
    for e in eps_list:
        print(f"{e!r} {curve[e]!r}")
    return 0


def cmd_attack(args) -> int:
    net, eta = _load_net(args)
    ds = load_dataset(args.data)
    ds.check_classes(net.q)
    cfg = AttackConfig(args.method, 0.0, args.steps, args.step_size, args.clip, args.seed)
    eps_list = _eps_list(args.eps_list)
    curve = empirical_robust_fraction(net, ds.inputs, ds.labels, eps_list, cfg, _solve_cfg(args, eta))
    model_id = args.model_id or Path(args.model).stem
    write_results(curve, args.out, args.method, model_id, _metadata(args))
    for e in eps_list:
        print(f"{e!r} {curve[e]!r}")
    return 0


def cmd_train(args) -> int:
    from .training import init_model, train

    cfg, model_opts, data_opts = load_training_config(args.config)
    overrides = {k: getattr(args, k) for k in ("epochs", "seed") if getattr(args, k) is not None}
    if overrides:
        from dataclasses import replace

        cfg = replace(cfg, **overrides)
    data_spec = args.data or data_opts.get("train")
    if not data_spec:
        raise InvalidInputError("no training data: pass --data or set data.train in the config")
    ds = load_dataset(data_spec)
    q = int(model_opts.get("q", int(ds.labels.max()) + 1))
    ds.check_classes(q)
    model = init_model(
        int(model_opts.get("n", 16)), ds.inputs.shape[1], q,
        gamma=float(model_opts.get("gamma", 0.0)),
        activation=model_opts.get("activation", "relu"),
        seed=int(model_opts.get("init_seed", cfg.seed)),
    )

    def report(stats, _model):
        print(f"epoch {stats.epoch} loss {stats.loss!r} nominal {stats.nominal_loss!r} "
              f"robust {stats.robust_loss!r} accuracy {stats.accuracy!r} eps {stats.eps!r} kappa {stats.kappa!r}")

    train(model, ds, cfg, callback=report)
    save_model(model, args.out)
    print(f"saved {args.out}")
    return 0


def cmd_bench(args) -> int:
    """Interval widths and iteration counts of every reachability method on random networks."""
    rng = np.random.default_rng(args.seed)
    rows = []
    for n in _sizes(args.sizes):
        for trial in range(args.trials):
            net, eta = random_network(n, args.r, args.q, gamma=args.gamma, activation=args.activation, seed=rng)
            center = rng.uniform(-1.0, 1.0, args.r)
            box = IntervalVector.from_center(center, args.eps)
            cfg = SolveConfig(tol=args.tol, eta=eta)
            runs = [
                ("inclusion", lambda: reach_inclusion(net, box, cfg)),
                ("lipschitz", lambda: reach_lipschitz(net, center, args.eps, cfg)),
                ("signsplit", lambda: reach_sign_split(net, box, cfg)),
            ]
            if args.r * args.grid ** args.r <= 10_000_000:
                runs.append(("brute", lambda: brute_force_tight_inclusion(net, box, args.grid, cfg)))
            for name, fn in runs:
                t0 = time.perf_counter()
                res = fn()
                dt = time.perf_counter() - t0
                width = float(np.mean(res.output_box.width)) if res.converged else float("inf")
                its = res.diagnostics.get("iterations", res.diagnostics.get("max_iterations", 0))
                row = [n, trial, name, repr(width), int(np.max(its)), str(res.converged).lower()]
                if not args.no_timing:
                    row.append(f"{dt:.6f}")
                rows.append(row)
    header = ["n", "trial", "method", "mean_width", "iterations", "converged"]
    if not args.no_timing:
        header.append("seconds")
    lines = [",".join(header)] + [",".join(str(v) for v in row) for row in rows]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8", newline="")
    sys.stdout.write(text)
    return 0


# --------------------------------------------------------------------------
# parser


def _add_solver_flags(p):
    p.add_argument("--alpha", type=float, default=None, help="damping (default: largest admissible)")
    p.add_argument("--tol", type=float, default=1e-10, help="residual tolerance")
    p.add_argument("--max-iter", type=int, default=100_000)


def _add_model_flags(p):
    p.add_argument("--model", required=True, help="model file (JSON)")
    p.add_argument("--eta", default=None,
                   help="weights when the model file has none: 'ones', 'auto', or a list/file of numbers")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="contractive-inn", description="Contraction analysis and certification of implicit networks.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("check", help="weighted measure, well-posedness and admissible damping")
    _add_model_flags(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("solve", help="fixed point and output for one input")
    _add_model_flags(p)
    p.add_argument("--input", required=True, help="input vector: numbers or a .npy/.txt file")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("reach", help="output box over an l-inf ball")
    _add_model_flags(p)
    p.add_argument("--center", required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--method", choices=("inclusion", "lipschitz", "signsplit", "brute"), default="inclusion")
    p.add_argument("--grid", type=int, default=11, help="grid points per dimension for --method brute")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_reach)

    for name, help_text in (("certify", "certified-fraction curve"), ("attack", "empirical robustness curve")):
        p = sub.add_parser(name, help=help_text)
        _add_model_flags(p)
        p.add_argument("--data", required=True, help="dataset: synthetic:<kind>:<count>:<seed>, images,labels IDX pair, or .npz")
        p.add_argument("--eps-list", required=True)
        p.add_argument("--out", required=True, help="CSV output path")
        p.add_argument("--model-id", default=None)
        p.add_argument("--clip", action="store_true", help="restrict inputs to [0, 1]")
        p.add_argument("--metadata", action="store_true", help="prepend a '#' metadata line")
        _add_solver_flags(p)
        if name == "certify":
            p.add_argument("--method", choices=("lipschitz", "inclusion"), required=True)
            p.add_argument("--certificates", default=None, help="also write per-sample certificates here")
            p.set_defaults(func=cmd_certify)
        else:
            p.add_argument("--method", choices=("pgd", "fgsm"), required=True)
            p.add_argument("--steps", type=int, default=40)
            p.add_argument("--step-size", type=float, default=None)
            p.add_argument("--seed", type=int, default=0)
            p.set_defaults(func=cmd_attack)

    p = sub.add_parser("train", help="train a model from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--data", default=None, help="training data (overrides data.train in the config)")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("bench", help="compare reachability methods on random networks")
    p.add_argument("--sizes", required=True, help="hidden sizes, e.g. 2,4,8")
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--r", type=int, default=2)
    p.add_argument("--q", type=int, default=2)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--activation", default="relu")
    p.add_argument("--grid", type=int, default=21)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.add_argument("--no-timing", action="store_true", help="omit the runtime column")
    p.set_defaults(func=cmd_bench)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if getattr(args, "trials", 1) < 1:
            raise InvalidInputError("--trials must be >= 1")
        return args.func(args)
    except (ContractiveINNError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
