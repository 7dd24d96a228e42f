"""Robustness certificates from the Lipschitz bound and from the embedded network.

Labels are 0-based class indices throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from ._parallel import map_chunks
from ._validation import as_batch, check_label
from .exceptions import ConvergenceError, InvalidInputError, WellPosednessError
from .measures import _weights, inf_operator_norm, sign_split, weighted_inf_measure
from .model import ImplicitNetwork, output_map
from .solver import EmbeddedFixedPoint, SolveConfig, solve_embedded, solve_fixed_point

METHODS = ("lipschitz", "inclusion")


@dataclass(frozen=True)
class LipschitzBound:
    """``eta_ratio * u_norm * c_norm / (1 - mu_plus)``, an upper bound on the l-inf Lipschitz constant."""

    value: float
    eta_ratio: float
    u_norm: float
    c_norm: float
    mu_plus: float

    @property
    def state_value(self) -> float:
        """Bound on the Lipschitz constant of the hidden fixed point ``x -> z*``."""
        return self.eta_ratio * self.u_norm / (1.0 - self.mu_plus)


@dataclass(frozen=True)
class Specification:
    """Specification matrix ``T`` with ``(T y)_j = y_label - y_j``."""

    true_label: int
    matrix: np.ndarray


@dataclass(frozen=True)
class Certificate:
    sample_id: int
    method: str
    eps: float
    margin: float
    certified: bool
    predicted_label: int
    true_label: int


def lipschitz_bound(net: ImplicitNetwork, w=None) -> LipschitzBound:
    """Upper bound on ``Lip_inf(f_N)``; refuses when the weighted measure is not below one."""
    w = _weights(w, net.n)
    mu = weighted_inf_measure(net.W, w)
    if mu >= 1.0:
        raise WellPosednessError(f"weighted measure of W is {mu:.6g} >= 1; no Lipschitz bound")
    mu_plus = max(mu, 0.0)
    u_norm = inf_operator_norm(net.U)
    c_norm = inf_operator_norm(net.C)
    value = w.ratio * u_norm * c_norm / (1.0 - mu_plus)
    return LipschitzBound(value, w.ratio, u_norm, c_norm, mu_plus)


def spec_matrix(label: int, q: int) -> Specification:
    """``1_q e_label^T - I_q``: zero row at ``label``, ``e_label - e_j`` elsewhere."""
    if q < 1:
        raise InvalidInputError(f"q must be >= 1, got {q}")
    label = check_label(label, q)
    T = -np.eye(q)
    T[:, label] += 1.0
    return Specification(label, T)


def predict_labels(logits: np.ndarray) -> np.ndarray:
    """Argmax with ties going to the smallest index."""
    return np.argmax(np.atleast_2d(logits), axis=1)


def classification_margin(logits, labels) -> np.ndarray:
    """``f_label - max_{j != label} f_j`` for each row (``+inf`` when ``q == 1``)."""
    F = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    labels = np.asarray(labels).reshape(-1)
    rows = np.arange(F.shape[0])
    others = F.copy()
    others[rows, labels] = -np.inf
    return F[rows, labels] - others.max(axis=1)


def m_lower(net: ImplicitNetwork, spec: Specification, efp: EmbeddedFixedPoint) -> np.ndarray:
    """Lower bound ``[TC]^+ z_lower + [TC]^- z_upper + T c`` on the logit gaps over the box."""
    if not efp.all_converged:
        raise ConvergenceError("embedded fixed point did not converge; no bound available")
    TC = spec.matrix @ net.C
    P, N = sign_split(TC)
    ZL = np.atleast_2d(efp.z_lower)
    ZU = np.atleast_2d(efp.z_upper)
    m = ZL @ P.T + ZU @ N.T + spec.matrix @ net.c
    return m[0] if np.ndim(efp.z_lower) == 1 else m


def _check_eps(eps) -> float:
    eps = float(eps)
    if not eps >= 0 or not np.isfinite(eps):
        raise InvalidInputError(f"eps must be finite and >= 0, got {eps}")
    return eps


def _certificate(sample_id, method, eps, margin, logits, label) -> Certificate:
    pred = int(predict_labels(logits)[0])
    correct = classification_margin(logits, [label])[0] > 0
    return Certificate(int(sample_id), method, eps, float(margin), bool(correct and margin >= 0), pred, label)


def certify_lipschitz(net, w, x, label, eps, cfg: SolveConfig | None = None, sample_id: int = 0) -> Certificate:
    """Certify via ``margin - 2 * Lip * eps >= 0`` at the nominal input."""
    eps = _check_eps(eps)
    label = check_label(label, net.q)
    bound = lipschitz_bound(net, w)
    cfg = _cfg_with_eta(cfg, w)
    z = solve_fixed_point(net, x, cfg)
    if not z.converged:
        raise ConvergenceError("fixed-point solve did not converge")
    f = output_map(net, z.z_star)
    margin = classification_margin(f, [label])[0] - 2.0 * bound.value * eps
    return _certificate(sample_id, "lipschitz", eps, margin, f, label)


def certify_inclusion(net, w, x, label, eps, cfg: SolveConfig | None = None, sample_id: int = 0,
                      clip: tuple[float, float] | None = None) -> Certificate:
    """Certify via the smallest lower logit gap over the box ``[x - eps, x + eps]``.

    ``clip`` optionally intersects the box with an input domain such as
    ``(0, 1)``; by default the box is left unclipped.
    """
    eps = _check_eps(eps)
    label = check_label(label, net.q)
    cfg = _cfg_with_eta(cfg, w)
    x = np.asarray(x, dtype=np.float64)
    lower, upper = _box(x, eps, clip)
    efp = solve_embedded(net, (lower, upper), cfg)
    z = solve_fixed_point(net, x, cfg)
    if not z.converged:
        raise ConvergenceError("fixed-point solve did not converge")
    f = output_map(net, z.z_star)
    m = m_lower(net, spec_matrix(label, net.q), efp)
    margin = _min_off_label(m, label)
    return _certificate(sample_id, "inclusion", eps, margin, f, label)


def _box(x, eps, clip):
    lower, upper = x - eps, x + eps
    if clip is not None:
        lower = np.clip(lower, clip[0], clip[1])
        upper = np.clip(upper, clip[0], clip[1])
    return lower, upper


def _min_off_label(m: np.ndarray, label: int) -> float:
    others = np.delete(np.asarray(m, dtype=np.float64), label)
    return float(others.min()) if others.size else np.inf


def _cfg_with_eta(cfg, w) -> SolveConfig:
    cfg = cfg or SolveConfig()
    if w is not None and cfg.eta is None:
        cfg = SolveConfig(alpha=cfg.alpha, tol=cfg.tol, max_iter=cfg.max_iter, eta=w)
    return cfg


def certify_batch(net, w, X, labels, eps, method: str, cfg: SolveConfig | None = None,
                  clip: tuple[float, float] | None = None, nominal=None) -> list[Certificate]:
    """Vectorized certification of many samples at one radius.

    Samples whose solves fail to converge come back uncertified with margin
    ``-inf``. ``nominal`` may carry precomputed ``(logits,)`` for the inputs.
    """
    if method not in METHODS:
        raise InvalidInputError(f"unknown method {method!r}; expected one of {METHODS}")
    eps = _check_eps(eps)
    X, _ = as_batch(X, net.r, "X")
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.shape[0] != X.shape[0]:
        raise InvalidInputError("inputs and labels differ in length")
    for lab in labels:
        check_label(lab, net.q)
    cfg = _cfg_with_eta(cfg, w)
    if nominal is None:
        nominal = _nominal_logits(net, X, cfg)
    logits, ok = nominal
    clean = classification_margin(logits, labels)
    if method == "lipschitz":
        margins = clean - 2.0 * lipschitz_bound(net, w).value * eps
    else:
        margins = _inclusion_margins(net, X, labels, eps, cfg, clip)
    margins = np.where(ok, margins, -np.inf)
    preds = predict_labels(logits)
    return [
        Certificate(i, method, eps, float(margins[i]), bool(ok[i] and clean[i] > 0 and margins[i] >= 0),
                    int(preds[i]), int(labels[i]))
        for i in range(X.shape[0])
    ]


def _nominal_logits(net, X, cfg):
    def work(idx):
        rep = solve_fixed_point(net, X[idx], cfg)
        return output_map(net, np.atleast_2d(rep.z_star)), np.atleast_1d(rep.converged)

    parts = map_chunks(work, X.shape[0])
    return np.vstack([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def _inclusion_margins(net, X, labels, eps, cfg, clip):
    lower, upper = _box(X, eps, clip)
    P_all, N_all, off_all = [], [], []
    for lab in range(net.q):
        T = spec_matrix(lab, net.q).matrix
        P, N = sign_split(T @ net.C)
        P_all.append(P)
        N_all.append(N)
        off_all.append(T @ net.c)

    def work(idx):
        efp = solve_embedded(net, (lower[idx], upper[idx]), cfg)
        ZL, ZU = np.atleast_2d(efp.z_lower), np.atleast_2d(efp.z_upper)
        out = np.full(len(idx), -np.inf)
        conv = np.atleast_1d(efp.converged)
        for k, i in enumerate(idx):
            if not conv[k]:
                continue
            lab = labels[i]
            m = P_all[lab] @ ZL[k] + N_all[lab] @ ZU[k] + off_all[lab]
            out[k] = _min_off_label(m, lab)
        return out

    return np.concatenate(map_chunks(work, X.shape[0]))


def certified_fraction_curve(net, w, X, labels, eps_list: Iterable[float], method: str,
                             cfg: SolveConfig | None = None, clip=None) -> dict[float, float]:
    """Fraction of samples certified at each radius; non-increasing in ``eps``.

    Monotonicity is enforced by construction: a sample counts at ``eps`` only
    if it is certified at every listed radius up to ``eps`` (the certificates
    are nested in exact arithmetic; this removes rounding-level flicker).
    """
    X, _ = as_batch(X, net.r, "X")
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    eps_sorted = sorted({_check_eps(e) for e in eps_list})
    if X.shape[0] == 0:
        return {e: 0.0 for e in eps_sorted}
    cfg = _cfg_with_eta(cfg, w)
    nominal = _nominal_logits(net, X, cfg)
    still = np.ones(X.shape[0], dtype=bool)
    curve = {}
    for e in eps_sorted:
        certs = certify_batch(net, w, X, labels, e, method, cfg, clip, nominal)
        still &= np.array([c.certified for c in certs])
        curve[e] = float(still.mean())
    return curve
