"""Damped (alpha-average) fixed-point iterations for the network and its box embedding.

All solvers accept a single input or a stack of inputs (rows). Samples are
iterated together but frozen as soon as they converge, so a sample's result
does not depend on what else is in the batch (up to last-bit differences in
how BLAS rounds stacked versus single rows).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._validation import as_batch
from .exceptions import InvalidInputError, WellPosednessError
from .measures import PositiveWeights, _weights, metzler_split, sign_split
from .model import ContractionCertificate, ImplicitNetwork, check_wellposed

# Step ratios below this size are dominated by rounding and are not recorded.
RATIO_FLOOR = 1e-8
DIVERGENCE_WINDOW = 100


@dataclass(frozen=True)
class SolveConfig:
    """Iteration settings.

    ``alpha=None`` picks the largest admissible damping for the network;
    ``eta=None`` means unit weights.
    """

    alpha: float | None = None
    tol: float = 1e-10
    max_iter: int = 100_000
    eta: PositiveWeights | None = None

    def __post_init__(self):
        if not self.tol > 0:
            raise InvalidInputError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise InvalidInputError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.alpha is not None and not self.alpha > 0:
            raise InvalidInputError(f"alpha must be positive, got {self.alpha}")
        if self.eta is not None and not isinstance(self.eta, PositiveWeights):
            object.__setattr__(self, "eta", PositiveWeights(self.eta))


@dataclass
class SolveReport:
    z_star: np.ndarray
    iterations: int | np.ndarray
    residual: float | np.ndarray
    contraction_estimate: float
    converged: bool | np.ndarray


@dataclass
class EmbeddedFixedPoint:
    z_lower: np.ndarray
    z_upper: np.ndarray
    iterations: int | np.ndarray
    residual: float | np.ndarray
    converged: bool | np.ndarray
    contraction_estimate: float = 0.0
    diverged: bool | np.ndarray = False

    @property
    def all_converged(self) -> bool:
        return bool(np.all(self.converged))


def resolve(net: ImplicitNetwork, cfg: SolveConfig | None, require_wellposed: bool = True):
    """Return ``(cfg, certificate, alpha)`` after validating damping and weights."""
    cfg = cfg or SolveConfig()
    cert = check_wellposed(net, _weights(cfg.eta, net.n))
    if require_wellposed and not cert.wellposed:
        raise WellPosednessError(
            f"weighted measure of W is {cert.mu:.6g} >= 1; fixed point not guaranteed"
        )
    alpha = cert.alpha_max if cfg.alpha is None else float(cfg.alpha)
    if alpha > cert.alpha_max * (1 + 1e-12):
        raise InvalidInputError(f"alpha={alpha} exceeds the admissible maximum {cert.alpha_max}")
    return cfg, cert, alpha


def contraction_factor(cert: ContractionCertificate, alpha: float, positive_part: bool = False) -> float:
    """Per-step rate ``1 - alpha (1 - mu)`` of the damped map.

    The nominal rate is exact for the identity activation. With slopes in
    ``[0, 1]`` a unit may have slope zero (an inactive ReLU) and then moves by
    the bare factor ``1 - alpha`` whatever the sign of ``mu``; pass
    ``positive_part=True`` for the bound ``1 - alpha (1 - max(mu, 0))`` that
    holds for every admissible activation.
    """
    if not 0 < alpha <= cert.alpha_max * (1 + 1e-12):
        raise InvalidInputError(f"alpha must lie in (0, {cert.alpha_max}], got {alpha}")
    mu = cert.mu_plus if positive_part else cert.mu
    c = 1.0 - alpha * (1.0 - mu)
    if c >= 1.0:
        raise WellPosednessError(f"damped map is not contracting (factor {c:.6g} >= 1)")
    return c


def _iterate(
    apply: Callable[[np.ndarray, np.ndarray], np.ndarray],
    Z: np.ndarray,
    alpha: float,
    eta: np.ndarray,
    tol: float,
    max_iter: int,
    detect_divergence: bool = False,
):
    """Run ``Z <- (1-alpha) Z + alpha apply(Z)`` row-wise until each row's residual is small.

    ``apply(Z_rows, idx)`` evaluates the map on the rows ``idx``. Convergence
    requires the residual ``Z - apply(Z)`` to be at most ``tol`` both in
    ``max |r_i|/eta_i`` and in ``max eta_i |r_i|``. Step ratios are measured
    in the latter norm, the one in which the map contracts.
    """
    m = Z.shape[0]
    Z = Z.copy()
    iterations = np.zeros(m, dtype=np.int64)
    residual = np.full(m, np.inf)
    converged = np.zeros(m, dtype=bool)
    diverged = np.zeros(m, dtype=bool)
    history = np.full((m, DIVERGENCE_WINDOW), np.nan) if detect_divergence else None
    inv_eta = 1.0 / eta
    max_ratio = 0.0
    active = np.arange(m)
    Za = Z
    prev = np.full(m, np.nan)
    for k in range(max_iter + 1):
        A = np.abs(R := Za - apply(Za, active))
        res_w = (A * inv_eta).max(axis=1)
        res_c = (A * eta).max(axis=1)
        residual[active] = res_w
        done = np.maximum(res_w, res_c) <= tol
        bad = ~np.isfinite(res_w)
        if detect_divergence:
            slot = k % DIVERGENCE_WINDOW
            if k >= DIVERGENCE_WINDOW:
                bad |= res_w > history[active, slot]
            history[active, slot] = res_w
        stop = done | bad
        if k == max_iter:
            converged[active[done]] = True
            diverged[active[bad & ~done]] = True
            Z[active] = Za
            break
        step_c = alpha * res_c
        # prev is the previous step size in the contraction norm, aligned with Za
        if k:
            ok = ~stop & (prev >= RATIO_FLOOR * np.maximum(1.0, (np.abs(Za) * eta).max(axis=1)))
            if ok.any():
                max_ratio = max(max_ratio, float((step_c[ok] / prev[ok]).max()))
        Znext = Za - alpha * R
        if stop.any():
            converged[active[done]] = True
            diverged[active[bad & ~done]] = True
            # frozen rows keep the iterate at which their residual was measured
            Z[active[stop]] = Za[stop]
            keep = ~stop
            active = active[keep]
            Znext = Znext[keep]
            step_c = step_c[keep]
        Za = Znext
        iterations[active] += 1
        prev = step_c
        if active.size == 0:
            break
    return Z, iterations, residual, converged, diverged, max_ratio


def _squeeze(single: bool, *arrays):
    if not single:
        return arrays
    return tuple(a[0] if isinstance(a, np.ndarray) else a for a in arrays)


def solve_fixed_point(net: ImplicitNetwork, x, cfg: SolveConfig | None = None, z0=None) -> SolveReport:
    """Solve ``z = phi(W z + U x + b)`` by damped iteration from ``z0`` (default zero).

    Raises :class:`WellPosednessError` if the weighted measure of ``W`` is not
    below one. Hitting ``max_iter`` is reported through ``converged``.
    """
    cfg, cert, alpha = resolve(net, cfg)
    X, single = as_batch(x, net.r, "x")
    drive = X @ net.U.T + net.b
    Z0 = np.zeros((X.shape[0], net.n)) if z0 is None else np.broadcast_to(
        as_batch(z0, net.n, "z0")[0], (X.shape[0], net.n)
    )
    W_T = net.W.T
    act = net.activation

    def apply(Z, idx):
        return act(Z @ W_T + drive[idx])

    Z, its, res, conv, _, ratio = _iterate(apply, Z0, alpha, cert.eta.eta, cfg.tol, cfg.max_iter)
    z, its, res, conv = _squeeze(single, Z, its, res, conv)
    if single:
        its, res, conv = int(its), float(res), bool(conv)
    return SolveReport(z, its, res, ratio, conv)


def _embedded(net, lower, upper, cfg, mode: str) -> EmbeddedFixedPoint:
    cfg, cert, alpha = resolve(net, cfg)
    XL, single = as_batch(lower, net.r, "box.lower")
    XU, _ = as_batch(upper, net.r, "box.upper")
    if XL.shape != XU.shape:
        raise InvalidInputError("box lower and upper have different shapes")
    if np.any(XL > XU):
        raise InvalidInputError("box lower bound exceeds upper bound")
    if mode == "metzler":
        A, B = metzler_split(net.W)
    else:
        A, B = sign_split(net.W)
    Up, Um = sign_split(net.U)
    drive_l = XL @ Up.T + XU @ Um.T + net.b
    drive_u = XU @ Up.T + XL @ Um.T + net.b
    n = net.n
    A_T, B_T = A.T, B.T
    act = net.activation

    def apply(Z, idx):
        zl, zu = Z[:, :n], Z[:, n:]
        return np.hstack(
            [act(zl @ A_T + zu @ B_T + drive_l[idx]), act(zu @ A_T + zl @ B_T + drive_u[idx])]
        )

    eta2 = np.concatenate([cert.eta.eta, cert.eta.eta])
    Z0 = np.zeros((XL.shape[0], 2 * n))
    Z, its, res, conv, div, ratio = _iterate(
        apply, Z0, alpha, eta2, cfg.tol, cfg.max_iter, detect_divergence=(mode == "sign")
    )
    zl, zu, its, res, conv, div = _squeeze(single, Z[:, :n], Z[:, n:], its, res, conv, div)
    if single:
        its, res, conv, div = int(its), float(res), bool(conv), bool(div)
    return EmbeddedFixedPoint(zl, zu, its, res, conv, ratio, div)


def solve_embedded(net: ImplicitNetwork, box, cfg: SolveConfig | None = None) -> EmbeddedFixedPoint:
    """Fixed point of the Metzler-split embedding over an input box.

    ``box`` is anything with ``lower``/``upper`` attributes (e.g.
    :class:`~contractive_inn.reachability.IntervalVector`) or a
    ``(lower, upper)`` pair; stacks of boxes are accepted row-wise.
    """
    lower, upper = _box_bounds(box)
    return _embedded(net, lower, upper, cfg, "metzler")


def solve_sign_split(net: ImplicitNetwork, box, cfg: SolveConfig | None = None) -> EmbeddedFixedPoint:
    """Like :func:`solve_embedded` but with the plain sign split of ``W``.

    This map need not contract under the same condition; divergence (residual
    growing over a 100-step window, or non-finite values) stops the sample and
    is reported through ``diverged``/``converged`` rather than raised.
    """
    lower, upper = _box_bounds(box)
    return _embedded(net, lower, upper, cfg, "sign")


def _box_bounds(box):
    if hasattr(box, "lower") and hasattr(box, "upper"):
        return box.lower, box.upper
    lower, upper = box
    return lower, upper
