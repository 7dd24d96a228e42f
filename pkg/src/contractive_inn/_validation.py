"""Small input-validation helpers shared by every module."""

from __future__ import annotations

import numpy as np

from .exceptions import InvalidInputError


def as_matrix(a, name: str = "matrix", square: bool = False) -> np.ndarray:
    """Return ``a`` as a finite 2-D float64 array (a copy is not forced)."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidInputError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if square and arr.shape[0] != arr.shape[1]:
        raise InvalidInputError(f"{name} must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return arr


def as_vector(v, name: str = "vector", length: int | None = None) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise InvalidInputError(f"{name} must be 1-D, got shape {arr.shape}")
    if length is not None and arr.shape[0] != length:
        raise InvalidInputError(f"{name} must have length {length}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return arr


def as_batch(x, dim: int, name: str = "x") -> tuple[np.ndarray, bool]:
    """Coerce a single vector or a stack of row vectors to shape ``(m, dim)``.

    Returns the 2-D array and whether the input was a single vector, so
    callers can squeeze their results back.
    """
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim <= 1
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise InvalidInputError(f"{name} must have trailing dimension {dim}, got shape {np.shape(x)}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return arr, single


def check_label(label, q: int) -> int:
    if isinstance(label, (bool, np.bool_)) or int(label) != label:
        raise InvalidInputError(f"label must be an integer, got {label!r}")
    label = int(label)
    if not 0 <= label < q:
        raise InvalidInputError(f"label {label} out of range [0, {q})")
    return label
