"""Implicit network ``z = phi(W z + U x + b)``, ``y = C z + c`` and its well-posedness test."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._validation import as_batch, as_matrix, as_vector
from .exceptions import InvalidInputError
from .measures import PositiveWeights, _weights, weighted_inf_measure

ACTIVATIONS = ("relu", "leaky_relu", "tanh", "sigmoid", "identity")


@dataclass(frozen=True)
class Activation:
    """A weakly increasing, non-expansive scalar activation applied componentwise.

    Parameters
    ----------
    kind : {'relu', 'leaky_relu', 'tanh', 'sigmoid', 'identity'}
    slope : float
        Negative-side slope of ``leaky_relu``; ignored otherwise.
    """

    kind: str = "relu"
    slope: float = 0.01

    def __post_init__(self):
        if self.kind not in ACTIVATIONS:
            raise InvalidInputError(f"unknown activation {self.kind!r}; expected one of {ACTIVATIONS}")
        if self.kind == "leaky_relu" and not 0.0 < self.slope < 1.0:
            raise InvalidInputError(f"leaky_relu slope must lie in (0, 1), got {self.slope}")

    @classmethod
    def parse(cls, spec) -> "Activation":
        """Accept an :class:`Activation`, a kind name, or ``'leaky_relu:<slope>'``."""
        if isinstance(spec, Activation):
            return spec
        kind, _, slope = str(spec).partition(":")
        if not slope:
            return cls(kind)
        try:
            return cls(kind, float(slope))
        except ValueError:
            raise InvalidInputError(f"bad activation slope in {spec!r}") from None

    def __call__(self, v):
        return activation_apply(self, v)

    def derivative(self, v):
        return activation_derivative(self, v)


def activation_apply(kind, v) -> np.ndarray:
    kind = Activation.parse(kind)
    v = np.asarray(v, dtype=np.float64)
    if kind.kind == "relu":
        return np.maximum(v, 0.0)
    if kind.kind == "leaky_relu":
        return np.where(v > 0, v, kind.slope * v)
    if kind.kind == "tanh":
        return np.tanh(v)
    if kind.kind == "sigmoid":
        # split by sign so exp never overflows
        e = np.exp(-np.abs(v))
        return np.where(v >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return v.copy()


def activation_derivative(kind, v) -> np.ndarray:
    """Derivative, with the inactive-branch subgradient at kinks (``relu'(0) = 0``)."""
    kind = Activation.parse(kind)
    v = np.asarray(v, dtype=np.float64)
    if kind.kind == "relu":
        return (v > 0).astype(np.float64)
    if kind.kind == "leaky_relu":
        return np.where(v > 0, 1.0, kind.slope)
    if kind.kind == "tanh":
        return 1.0 - np.tanh(v) ** 2
    if kind.kind == "sigmoid":
        s = activation_apply(kind, v)
        return s * (1.0 - s)
    return np.ones_like(v)


@dataclass(frozen=True)
class ImplicitNetwork:
    """Parameters of the implicit network. Arrays are copied and frozen on construction."""

    W: np.ndarray
    U: np.ndarray
    b: np.ndarray
    C: np.ndarray
    c: np.ndarray
    activation: Activation = field(default_factory=Activation)

    def __post_init__(self):
        W = as_matrix(self.W, "W", square=True)
        n = W.shape[0]
        U = as_matrix(self.U, "U")
        if U.shape[0] != n:
            raise InvalidInputError(f"U must have {n} rows, got shape {U.shape}")
        C = as_matrix(self.C, "C")
        if C.shape[1] != n:
            raise InvalidInputError(f"C must have {n} columns, got shape {C.shape}")
        b = as_vector(self.b, "b", n)
        c = as_vector(self.c, "c", C.shape[0])
        for name, arr in zip("WUbCc", (W, U, b, C, c)):
            arr = np.array(arr, dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "activation", Activation.parse(self.activation))

    @classmethod
    def from_arrays(cls, W, U, b=None, C=None, c=None, activation="relu") -> "ImplicitNetwork":
        """Convenience constructor filling ``b, c`` with zeros and ``C`` with the identity."""
        W = np.atleast_2d(np.asarray(W, dtype=np.float64))
        U = np.atleast_2d(np.asarray(U, dtype=np.float64))
        n = W.shape[0]
        C = np.eye(n) if C is None else np.atleast_2d(np.asarray(C, dtype=np.float64))
        b = np.zeros(n) if b is None else b
        c = np.zeros(C.shape[0]) if c is None else c
        return cls(W, U, b, C, c, Activation.parse(activation))

    @property
    def n(self) -> int:
        return self.W.shape[0]

    @property
    def r(self) -> int:
        return self.U.shape[1]

    @property
    def q(self) -> int:
        return self.C.shape[0]

    def replace(self, **changes) -> "ImplicitNetwork":
        kw = dict(W=self.W, U=self.U, b=self.b, C=self.C, c=self.c, activation=self.activation)
        kw.update(changes)
        return ImplicitNetwork(**kw)


def forward_map(net: ImplicitNetwork, z, x) -> np.ndarray:
    """``phi(W z + U x + b)``; ``z`` and ``x`` may be matching stacks of rows."""
    Z, single_z = as_batch(z, net.n, "z")
    X, single_x = as_batch(x, net.r, "x")
    if Z.shape[0] != X.shape[0]:
        raise InvalidInputError(f"z and x batch sizes differ: {Z.shape[0]} vs {X.shape[0]}")
    out = net.activation(Z @ net.W.T + X @ net.U.T + net.b)
    return out[0] if single_z and single_x else out


def output_map(net: ImplicitNetwork, z) -> np.ndarray:
    """Readout ``C z + c``."""
    Z, single = as_batch(z, net.n, "z")
    y = Z @ net.C.T + net.c
    return y[0] if single else y


@dataclass(frozen=True)
class ContractionCertificate:
    """Outcome of the well-posedness test for a given weight vector."""

    eta: PositiveWeights
    mu: float
    alpha_max: float
    wellposed: bool

    @property
    def mu_plus(self) -> float:
        return max(self.mu, 0.0)


def alpha_upper_bound(W) -> float:
    """Largest admissible damping ``(1 - min_i min(W_ii, 0))^-1``."""
    d = np.diag(np.asarray(W, dtype=np.float64))
    return 1.0 / (1.0 - min(float(d.min()), 0.0))


def check_wellposed(net: ImplicitNetwork, w=None) -> ContractionCertificate:
    """Evaluate the weighted measure of ``W``; well-posed iff it is below one."""
    w = _weights(w, net.n)
    mu = weighted_inf_measure(net.W, w)
    return ContractionCertificate(w, mu, alpha_upper_bound(net.W), mu < 1.0)


def suggest_eta(W, max_iter: int = 10_000, tol: float = 1e-12) -> PositiveWeights:
    """Heuristic weights that lower the weighted measure of ``W``.

    Runs power iteration on the shifted comparison matrix (diagonal of ``W``,
    absolute off-diagonal entries). With Perron vector ``v`` the choice
    ``eta = 1/v`` makes every row term equal to the Perron root, which is the
    smallest measure reachable by diagonal weighting. The result is never
    worse than unit weights: if iteration stagnates or lands above the
    unit-weight measure, ones are returned.
    """
    W = as_matrix(W, "W", square=True)
    n = W.shape[0]
    ones = PositiveWeights.ones(n)
    M = np.abs(W)
    np.fill_diagonal(M, np.diag(W))
    M += (1.0 + max(0.0, -float(np.diag(W).min()))) * np.eye(n)
    v = np.ones(n)
    converged = False
    for _ in range(max_iter):
        nv = M @ v
        nv /= nv.max()
        if np.max(np.abs(nv - v)) <= tol:
            v = nv
            converged = True
            break
        v = nv
    if not converged or not np.all(np.isfinite(v)):
        return ones
    eta = np.clip(1.0 / np.maximum(v, 1e-300), 1e-6, 1e6)
    eta = eta / eta.min()
    eta = np.clip(eta, 1e-6, 1e6)
    candidate = PositiveWeights(eta)
    if weighted_inf_measure(W, candidate) <= weighted_inf_measure(W, ones):
        return candidate
    return ones


def random_network(n: int, r: int, q: int, gamma: float = 0.5, activation="relu", seed=0,
                   eta_spread: float = 0.0, scale: float = 1.0) -> tuple[ImplicitNetwork, PositiveWeights]:
    """A random network with weighted measure at most ``gamma``, and its weights.

    ``W`` comes from :func:`~contractive_inn.measures.parametrize_weight` with a
    Gaussian ``T``; ``eta = exp(eta_spread * N(0, 1))``. Other entries are
    Gaussian with standard deviation ``scale``.
    """
    from .measures import parametrize_weight

    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    eta = PositiveWeights(np.exp(eta_spread * rng.standard_normal(n)))
    T = rng.standard_normal((n, n)) * scale
    W = parametrize_weight(T, eta, gamma)
    net = ImplicitNetwork(
        W, rng.standard_normal((n, r)) * scale, rng.standard_normal(n) * scale,
        rng.standard_normal((q, n)) * scale, rng.standard_normal(q) * scale, Activation.parse(activation),
    )
    return net, eta
