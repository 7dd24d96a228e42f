"""Sign and Metzler splits, weighted infinity norms and matrix measures.

The weighted matrix measure uses the row expression

    mu(A; eta) = max_i  A_ii + sum_{j != i} (eta_i / eta_j) |A_ij|

and :func:`parametrize_weight` is built to be consistent with exactly that
expression. The vector norm which induces this measure is
``max_i eta_i |x_i|`` (see :func:`contraction_norm`); :func:`weighted_inf_norm`
is the reciprocal weighting ``max_i |x_i| / eta_i``. The two coincide for unit
weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._validation import as_matrix, as_vector
from .exceptions import InvalidInputError, WellPosednessError


@dataclass(frozen=True)
class PositiveWeights:
    """A strictly positive weight vector ``eta``."""

    eta: np.ndarray

    def __post_init__(self):
        eta = as_vector(self.eta, "eta").copy()
        if np.any(eta <= 0):
            raise InvalidInputError("eta must be strictly positive")
        eta.setflags(write=False)
        object.__setattr__(self, "eta", eta)

    @classmethod
    def ones(cls, n: int) -> "PositiveWeights":
        return cls(np.ones(n))

    @property
    def n(self) -> int:
        return self.eta.shape[0]

    @property
    def eta_max(self) -> float:
        return float(self.eta.max())

    @property
    def eta_min(self) -> float:
        return float(self.eta.min())

    @property
    def ratio(self) -> float:
        """``eta_max / eta_min``, the condition number of ``[eta]``."""
        return self.eta_max / self.eta_min


class SplitPair(NamedTuple):
    plus: np.ndarray
    minus: np.ndarray


class MetzlerPair(NamedTuple):
    metzler: np.ndarray
    nonmetzler: np.ndarray


def _weights(w, n: int) -> PositiveWeights:
    if w is None:
        return PositiveWeights.ones(n)
    if not isinstance(w, PositiveWeights):
        w = PositiveWeights(w)
    if w.n != n:
        raise InvalidInputError(f"eta has length {w.n}, expected {n}")
    return w


def sign_split(B) -> SplitPair:
    """Split ``B`` into its non-negative and non-positive parts."""
    B = as_matrix(B, "B")
    return SplitPair(np.maximum(B, 0.0), np.minimum(B, 0.0))


def metzler_mask(A: np.ndarray) -> np.ndarray:
    """Boolean mask of the entries kept by the Metzler part of square ``A``."""
    return (A >= 0) | np.eye(A.shape[0], dtype=bool)


def metzler_split(A) -> MetzlerPair:
    """Split square ``A`` into its Metzler and non-Metzler parts.

    The Metzler part keeps the whole diagonal and the non-negative
    off-diagonal entries; the remainder holds the negative off-diagonal ones.
    """
    A = as_matrix(A, "A", square=True)
    mask = metzler_mask(A)
    metzler = np.where(mask, A, 0.0)
    return MetzlerPair(metzler, np.where(mask, 0.0, A))


def weighted_inf_norm(x, w=None) -> float:
    """``max_i |x_i| / eta_i``; with ``w=None`` the plain infinity norm."""
    x = as_vector(x, "x")
    w = _weights(w, x.shape[0])
    if x.size == 0:
        return 0.0
    return float(np.max(np.abs(x) / w.eta))


def contraction_norm(x, w=None) -> np.ndarray | float:
    """``max_i eta_i |x_i|``, the norm whose induced measure is :func:`weighted_inf_measure`.

    Accepts a single vector or a stack of row vectors (returns one value per row).
    """
    x = np.asarray(x, dtype=np.float64)
    eta = np.ones(x.shape[-1]) if w is None else _weights(w, x.shape[-1]).eta
    out = np.max(np.abs(x) * eta, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def weighted_inf_measure(A, w=None) -> float:
    """Weighted infinity matrix measure of square ``A`` (row expression above)."""
    A = as_matrix(A, "A", square=True)
    w = _weights(w, A.shape[0])
    return float(np.max(measure_rows(A, w.eta)))


def measure_rows(A: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """Per-row terms ``A_ii + sum_{j != i} (eta_i/eta_j)|A_ij|`` (no validation)."""
    scaled = np.abs(A) * (eta[:, None] / eta[None, :])
    np.fill_diagonal(scaled, 0.0)
    return np.diag(A) + scaled.sum(axis=1)


def inf_operator_norm(B) -> float:
    """Induced infinity norm: the largest absolute row sum."""
    B = as_matrix(B, "B")
    return float(np.max(np.abs(B).sum(axis=1)))


def parametrize_weight(T, w=None, gamma: float = 0.0) -> np.ndarray:
    """Map an unconstrained ``T`` to a weight matrix with measure at most ``gamma``.

    ``W = [eta]^-1 T [eta] - diag(|T| 1) + gamma I``.
    """
    T = as_matrix(T, "T", square=True)
    w = _weights(w, T.shape[0])
    gamma = float(gamma)
    if not np.isfinite(gamma) or gamma >= 1.0:
        raise WellPosednessError(f"gamma must be finite and < 1, got {gamma}")
    eta = w.eta
    W = T * (eta[None, :] / eta[:, None])
    W[np.diag_indices_from(W)] -= np.abs(T).sum(axis=1)
    W[np.diag_indices_from(W)] += gamma
    return W
