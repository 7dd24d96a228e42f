"""Box over-approximations of the network's reachable set.

Four routes are provided: the Metzler-split embedding (tightest of the
guaranteed ones), a Lipschitz ball, the plain sign-split embedding (more
conservative and not guaranteed to converge), and a grid oracle that
under-approximates the tight interval and only serves for testing.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from ._validation import as_vector
from .certification import lipschitz_bound
from .exceptions import BudgetError, ConvergenceError, InvalidInputError
from .measures import sign_split
from .model import ImplicitNetwork, output_map
from .solver import SolveConfig, resolve, solve_embedded, solve_fixed_point, solve_sign_split

GRID_BUDGET = 10_000_000


@dataclass(frozen=True)
class IntervalVector:
    """A box ``{y : lower <= y <= upper}``; infinite bounds are allowed."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lower, dtype=np.float64).reshape(-1)
        hi = np.array(self.upper, dtype=np.float64).reshape(-1)
        if lo.shape != hi.shape:
            raise InvalidInputError(f"lower and upper differ in length: {lo.shape} vs {hi.shape}")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            raise InvalidInputError("interval bounds contain NaN")
        if np.any(lo > hi):
            raise InvalidInputError("interval lower bound exceeds upper bound")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def from_center(cls, center, radius: float) -> "IntervalVector":
        center = as_vector(center, "center")
        if radius < 0:
            raise InvalidInputError(f"radius must be >= 0, got {radius}")
        return cls(center - radius, center + radius)

    @classmethod
    def point(cls, x) -> "IntervalVector":
        return cls.from_center(x, 0.0)

    def __len__(self) -> int:
        return self.lower.shape[0]

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def contains(self, y, tol: float = 0.0) -> np.ndarray | bool:
        """Whether point(s) ``y`` lie in the box enlarged by ``tol``."""
        y = np.asarray(y, dtype=np.float64)
        inside = np.all((y >= self.lower - tol) & (y <= self.upper + tol), axis=-1)
        return bool(inside) if np.ndim(inside) == 0 else inside

    def issubset(self, other: "IntervalVector", tol: float = 0.0) -> bool:
        return bool(np.all(self.lower >= other.lower - tol) and np.all(self.upper <= other.upper + tol))


@dataclass
class ReachResult:
    output_box: IntervalVector
    state_box: IntervalVector
    method: str
    converged: bool = True
    diagnostics: dict = field(default_factory=dict)


def _check_box(net: ImplicitNetwork, box) -> IntervalVector:
    if not isinstance(box, IntervalVector):
        box = IntervalVector(*box)
    if len(box) != net.r:
        raise InvalidInputError(f"box has dimension {len(box)}, network expects {net.r}")
    if not (np.all(np.isfinite(box.lower)) and np.all(np.isfinite(box.upper))):
        raise InvalidInputError("input box must be bounded")
    return box


def _readout_box(net: ImplicitNetwork, z_lower, z_upper) -> IntervalVector:
    Cp, Cm = sign_split(net.C)
    lo = Cp @ z_lower + Cm @ z_upper + net.c
    hi = Cp @ z_upper + Cm @ z_lower + net.c
    return IntervalVector(lo, hi)


def reach_inclusion(net: ImplicitNetwork, box, cfg: SolveConfig | None = None) -> ReachResult:
    """Output box from the fixed point of the Metzler-split embedding."""
    box = _check_box(net, box)
    efp = solve_embedded(net, box, cfg)
    if not efp.converged:
        raise ConvergenceError(f"embedded solve did not converge (residual {efp.residual:.3g})")
    return ReachResult(
        _readout_box(net, efp.z_lower, efp.z_upper),
        IntervalVector(efp.z_lower, efp.z_upper),
        "metzler_inclusion",
        True,
        {"iterations": efp.iterations, "residual": efp.residual},
    )


def reach_lipschitz(net: ImplicitNetwork, center, eps: float, cfg: SolveConfig | None = None) -> ReachResult:
    """Ball of radius ``Lip * eps`` around the nominal output."""
    if not eps >= 0:
        raise InvalidInputError(f"eps must be >= 0, got {eps}")
    cfg, cert, _ = resolve(net, cfg)
    center = as_vector(center, "center", net.r)
    bound = lipschitz_bound(net, cert.eta)
    rep = solve_fixed_point(net, center, cfg)
    if not rep.converged:
        raise ConvergenceError("fixed-point solve did not converge")
    f = output_map(net, rep.z_star)
    xi = bound.value * eps
    zeta = bound.state_value * eps
    return ReachResult(
        IntervalVector(f - xi, f + xi),
        IntervalVector(rep.z_star - zeta, rep.z_star + zeta),
        "lipschitz_ball",
        True,
        {"iterations": rep.iterations, "residual": rep.residual, "lipschitz": bound.value},
    )


def reach_sign_split(net: ImplicitNetwork, box, cfg: SolveConfig | None = None) -> ReachResult:
    """Output box from the sign-split embedding; non-convergence yields an unbounded box."""
    box = _check_box(net, box)
    efp = solve_sign_split(net, box, cfg)
    diagnostics = {"iterations": efp.iterations, "residual": efp.residual, "diverged": efp.diverged}
    if not efp.converged:
        inf = np.full(net.q, np.inf)
        zinf = np.full(net.n, np.inf)
        return ReachResult(IntervalVector(-inf, inf), IntervalVector(-zinf, zinf), "sign_split", False, diagnostics)
    return ReachResult(
        _readout_box(net, efp.z_lower, efp.z_upper),
        IntervalVector(efp.z_lower, efp.z_upper),
        "sign_split",
        True,
        diagnostics,
    )


def grid_points(box: IntervalVector, grid_per_dim: int) -> np.ndarray:
    """Regular grid over the box including every corner; shape ``(grid**r, r)``."""
    axes = [np.linspace(lo, hi, grid_per_dim) for lo, hi in zip(box.lower, box.upper)]
    return np.array(list(itertools.product(*axes)), dtype=np.float64).reshape(-1, len(box))


def brute_force_tight_inclusion(net: ImplicitNetwork, box, grid_per_dim: int = 11,
                                cfg: SolveConfig | None = None, chunk: int = 4096) -> ReachResult:
    """Componentwise min/max of the network over a regular grid (test oracle).

    The result under-approximates the tight inclusion interval. Refuses when
    ``r * grid_per_dim**r`` exceeds ten million.
    """
    box = _check_box(net, box)
    if grid_per_dim < 2:
        raise InvalidInputError("grid_per_dim must be >= 2 so that corners are included")
    if net.r * grid_per_dim ** net.r > GRID_BUDGET:
        raise BudgetError(f"grid of {grid_per_dim}^{net.r} points exceeds the evaluation budget")
    pts = grid_points(box, grid_per_dim)
    y_lo = np.full(net.q, np.inf)
    y_hi = np.full(net.q, -np.inf)
    z_lo = np.full(net.n, np.inf)
    z_hi = np.full(net.n, -np.inf)
    iters = 0
    for s in range(0, pts.shape[0], chunk):
        rep = solve_fixed_point(net, pts[s:s + chunk], cfg)
        if not np.all(rep.converged):
            raise ConvergenceError("fixed-point solve did not converge on the grid")
        Z = rep.z_star
        Y = output_map(net, Z)
        y_lo = np.minimum(y_lo, Y.min(axis=0))
        y_hi = np.maximum(y_hi, Y.max(axis=0))
        z_lo = np.minimum(z_lo, Z.min(axis=0))
        z_hi = np.maximum(z_hi, Z.max(axis=0))
        iters = max(iters, int(np.max(rep.iterations)))
    return ReachResult(
        IntervalVector(y_lo, y_hi),
        IntervalVector(z_lo, z_hi),
        "brute_force",
        True,
        {"points": int(pts.shape[0]), "max_iterations": iters},
    )
