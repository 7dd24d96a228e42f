"""Softmax cross-entropy and its gradient (row-wise for stacks of logits)."""

from __future__ import annotations

import numpy as np

from ._validation import check_label
from .exceptions import InvalidInputError


def log_softmax(logits: np.ndarray) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def cross_entropy(logits, label) -> float | np.ndarray:
    """``-log softmax(logits)[label]``, stabilized by max-subtraction.

    With a 2-D ``logits`` and a label array, returns one loss per row.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise InvalidInputError("logits must be finite")
    if logits.ndim == 1:
        label = check_label(label, logits.shape[0])
        return float(-log_softmax(logits)[label])
    labels = np.asarray(label, dtype=np.int64).reshape(-1)
    if labels.shape[0] != logits.shape[0] or np.any(labels < 0) or np.any(labels >= logits.shape[1]):
        raise InvalidInputError("labels do not match logits")
    return -log_softmax(logits)[np.arange(labels.shape[0]), labels]


def cross_entropy_grad(logits, labels) -> tuple[np.ndarray, np.ndarray]:
    """Per-row losses and ``d loss / d logits = softmax - onehot`` for 2-D ``logits``."""
    logits = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    logp = log_softmax(logits)
    rows = np.arange(labels.shape[0])
    grad = np.exp(logp)
    grad[rows, labels] -= 1.0
    return -logp[rows, labels], grad
