"""FGSM and PGD attacks inside an l-inf ball, and empirical robustness curves.

A sample counts as broken when some iterate has a strictly negative logit
margin (another class strictly above the true one). Certificates guarantee a
non-negative margin over the whole ball, so this notion of success can never
contradict a certificate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from ._parallel import map_chunks
from ._validation import as_batch, as_vector, check_label
from .certification import classification_margin
from .exceptions import InvalidInputError
from .gradients import loss_and_input_gradient
from .model import ImplicitNetwork
from .solver import SolveConfig

__all__ = ["AttackConfig", "AttackResult", "fgsm", "pgd", "attack_batch", "empirical_robust_fraction"]

METHODS = ("fgsm", "pgd")


@dataclass(frozen=True)
class AttackConfig:
    """Attack settings. ``step_size=None`` means ``eps / 10``."""

    method: str = "pgd"
    eps: float = 0.1
    steps: int = 40
    step_size: float | None = None
    clip_to_unit_box: bool = False
    seed: int = 0
    random_start: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidInputError(f"method must be one of {METHODS}, got {self.method!r}")
        if not (np.isfinite(self.eps) and self.eps >= 0):
            raise InvalidInputError(f"eps must be finite and >= 0, got {self.eps}")
        if self.steps < 1:
            raise InvalidInputError(f"steps must be >= 1, got {self.steps}")
        if self.step_size is not None and not self.step_size > 0:
            raise InvalidInputError(f"step_size must be positive, got {self.step_size}")

    @property
    def effective_step(self) -> float:
        return self.eps / 10.0 if self.step_size is None else float(self.step_size)

    def with_eps(self, eps: float) -> "AttackConfig":
        return AttackConfig(self.method, eps, self.steps, self.step_size, self.clip_to_unit_box,
                            self.seed, self.random_start)


@dataclass
class AttackResult:
    """Per-sample adversarial inputs, their losses, and whether any iterate broke the sample."""

    x_adv: np.ndarray
    loss: np.ndarray
    fooled: np.ndarray


def _project(X_adv, X, eps, clip):
    X_adv = np.clip(X_adv, X - eps, X + eps)
    if clip:
        X_adv = np.clip(X_adv, 0.0, 1.0)
    return X_adv


def _start_directions(n_samples: int, r: int, seed: int, sample_ids) -> np.ndarray:
    """Uniform directions in ``[-1, 1]^r`` drawn from a generator keyed by ``(seed, sample_id)``.

    The same direction is reused for every radius (scaled by ``eps``).
    """
    out = np.empty((n_samples, r))
    for k, sid in enumerate(sample_ids):
        out[k] = np.random.default_rng([int(seed), int(sid)]).uniform(-1.0, 1.0, r)
    return out


def _fgsm_batch(net, X, labels, eps, clip, solve_cfg):
    if eps == 0:
        losses, _ = loss_and_input_gradient(net, X, labels, solve_cfg)
        return X.copy(), np.atleast_1d(losses)
    _, grad = loss_and_input_gradient(net, X, labels, solve_cfg)
    X_adv = _project(X + eps * np.sign(grad), X, eps, clip)
    losses, _ = loss_and_input_gradient(net, X_adv, labels, solve_cfg)
    return X_adv, np.atleast_1d(losses)


def _margins(net, X, labels, solve_cfg):
    from .certification import _nominal_logits

    logits, _ = _nominal_logits(net, X, solve_cfg)
    return classification_margin(logits, labels)


def attack_batch(net: ImplicitNetwork, X, labels, cfg: AttackConfig, solve_cfg: SolveConfig | None = None,
                 sample_ids=None) -> AttackResult:
    """Attack every row of ``X``; per-sample results do not depend on batching."""
    X, _ = as_batch(X, net.r, "X")
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.shape[0] != X.shape[0]:
        raise InvalidInputError("inputs and labels differ in length")
    for lab in labels:
        check_label(lab, net.q)
    sample_ids = np.arange(X.shape[0]) if sample_ids is None else np.asarray(sample_ids).reshape(-1)
    eps, clip = float(cfg.eps), cfg.clip_to_unit_box
    if X.shape[0] == 0:
        return AttackResult(X.copy(), np.zeros(0), np.zeros(0, dtype=bool))
    if cfg.method == "fgsm":
        X_adv, loss = _fgsm_batch(net, X, labels, eps, clip, solve_cfg)
        return AttackResult(X_adv, loss, _margins(net, X_adv, labels, solve_cfg) < 0)
    if eps == 0:
        X_adv = _project(X.copy(), X, 0.0, clip)
        loss, _ = loss_and_input_gradient(net, X_adv, labels, solve_cfg)
        return AttackResult(X_adv, np.atleast_1d(loss), _margins(net, X_adv, labels, solve_cfg) < 0)
    X_cur = X.copy()
    if cfg.random_start:
        X_cur = X_cur + eps * _start_directions(X.shape[0], net.r, cfg.seed, sample_ids)
    X_cur = _project(X_cur, X, eps, clip)
    best = X_cur.copy()
    best_loss = np.full(X.shape[0], -np.inf)
    fooled = np.zeros(X.shape[0], dtype=bool)
    step = cfg.effective_step
    _, grad = loss_and_input_gradient(net, X_cur, labels, solve_cfg)
    for _ in range(cfg.steps):
        X_cur = _project(X_cur + step * np.sign(np.atleast_2d(grad)), X, eps, clip)
        loss, grad = loss_and_input_gradient(net, X_cur, labels, solve_cfg)
        loss = np.atleast_1d(loss)
        better = loss > best_loss
        best[better] = X_cur[better]
        best_loss[better] = loss[better]
        fooled |= _margins(net, X_cur, labels, solve_cfg) < 0
    return AttackResult(best, best_loss, fooled)


def fgsm(net: ImplicitNetwork, x, label, cfg: AttackConfig, solve_cfg: SolveConfig | None = None) -> np.ndarray:
    """``x + eps * sign(grad_x loss)`` with ``sign(0) = 0``, optionally clipped to ``[0, 1]``."""
    x = as_vector(x, "x", net.r)
    cfg = cfg if cfg.method == "fgsm" else AttackConfig("fgsm", cfg.eps, clip_to_unit_box=cfg.clip_to_unit_box)
    return attack_batch(net, x[None, :], [label], cfg, solve_cfg).x_adv[0]


def pgd(net: ImplicitNetwork, x, label, cfg: AttackConfig, solve_cfg: SolveConfig | None = None,
        sample_id: int = 0) -> np.ndarray:
    """Projected signed-gradient ascent from a random start; returns the highest-loss iterate."""
    x = as_vector(x, "x", net.r)
    if cfg.method != "pgd":
        raise InvalidInputError("pgd() needs an AttackConfig with method='pgd'")
    return attack_batch(net, x[None, :], [label], cfg, solve_cfg, [sample_id]).x_adv[0]


def empirical_robust_fraction(net: ImplicitNetwork, X, labels, eps_list: Iterable[float], cfg: AttackConfig,
                              solve_cfg: SolveConfig | None = None) -> dict[float, float]:
    """Fraction of samples that no attack broke, for each radius.

    A sample broken at some radius stays broken at every larger one (the
    smaller ball is contained in the larger), so the curve is non-increasing.
    At ``eps = 0`` the value is the fraction with a strictly positive margin.
    """
    X, _ = as_batch(X, net.r, "X")
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    eps_sorted = sorted({float(e) for e in eps_list})
    if any(not (np.isfinite(e) and e >= 0) for e in eps_sorted):
        raise InvalidInputError("every eps must be finite and >= 0")
    if X.shape[0] == 0:
        return {e: 0.0 for e in eps_sorted}
    alive = _margins(net, X, labels, solve_cfg) > 0
    curve = {}
    for e in eps_sorted:
        if e > 0:
            c = cfg.with_eps(e)

            def work(idx, c=c):
                return attack_batch(net, X[idx], labels[idx], c, solve_cfg, idx).fooled

            alive &= ~np.concatenate(map_chunks(work, X.shape[0]))
        curve[e] = float(alive.mean())
    return curve
