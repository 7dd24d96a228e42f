"""Implicit differentiation through the network's fixed points.

For ``z* = phi(W z* + U x + b)`` the cotangent ``v`` on ``z*`` is pulled back
with the adjoint fixed point ``w = v + W^T D w`` (``D = diag phi'(u*)``),
solved by the same damped iteration as the forward pass. The transposed map
contracts in the dual norm ``sum_i |w_i| / eta_i`` with the same factor.
The embedded system is handled the same way on the stacked ``2n`` state,
with the Metzler and sign masks frozen at their forward-pass values.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from ._validation import as_batch, check_label
from .exceptions import ConvergenceError, InvalidInputError
from .losses import cross_entropy_grad
from .measures import metzler_mask, metzler_split, sign_split
from .model import ImplicitNetwork, output_map
from .solver import SolveConfig, resolve, solve_embedded, solve_fixed_point

KINK_TOL = 1e-4


@dataclass
class ParameterGradients:
    """Gradients with respect to every network parameter and the input(s).

    Parameter gradients are summed over a batch; input gradients keep one row
    per sample. For the embedded system, ``d_x_lower``/``d_x_upper`` hold the
    box-endpoint gradients and ``d_x`` their sum.
    """

    d_W: np.ndarray
    d_U: np.ndarray
    d_b: np.ndarray
    d_C: np.ndarray
    d_c: np.ndarray
    d_x: np.ndarray
    d_x_lower: np.ndarray | None = None
    d_x_upper: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict, compare=False)

    def params(self) -> dict[str, np.ndarray]:
        return {"W": self.d_W, "U": self.d_U, "b": self.d_b, "C": self.d_C, "c": self.d_c}

    def __add__(self, other: "ParameterGradients") -> "ParameterGradients":
        out = {}
        for f in fields(self):
            if f.name == "diagnostics":
                continue
            a, b = getattr(self, f.name), getattr(other, f.name)
            out[f.name] = None if a is None or b is None else a + b
        return ParameterGradients(**out)


def _zeros_like_params(net: ImplicitNetwork, d_x) -> ParameterGradients:
    return ParameterGradients(
        np.zeros_like(net.W), np.zeros_like(net.U), np.zeros(net.n),
        np.zeros_like(net.C), np.zeros(net.q), d_x,
    )


def _adjoint(pullback, V: np.ndarray, alpha: float, dual_eta: np.ndarray, tol: float, max_iter: int):
    """Solve ``w = v + pullback(w)`` row-wise by damped iteration."""
    Wt = V.copy()
    if Wt.size == 0:
        return Wt, 0, 0.0
    inv = 1.0 / dual_eta
    prev = None
    ratio = 0.0
    for k in range(1, max_iter + 1):
        step = alpha * (V + pullback(Wt) - Wt)
        Wt = Wt + step
        A = np.abs(step)
        scale = max(1.0, float(np.abs(Wt).max()))
        dual = float((A @ inv).max())
        if prev is not None and prev >= 1e-8 * scale:
            ratio = max(ratio, dual / prev)
        prev = dual
        if A.max() <= tol * scale:
            return Wt, k, ratio
    raise ConvergenceError(f"adjoint iteration did not converge in {max_iter} steps")


def fixed_point_vjp(net: ImplicitNetwork, x, z_star, v, cfg: SolveConfig | None = None,
                    adjoint_tol: float = 1e-13, residual_tol: float = 1e-6) -> ParameterGradients:
    """Pull back a cotangent ``v`` on ``z*`` to ``W, U, b`` and ``x``.

    ``x``, ``z_star`` and ``v`` may be stacks of rows (one per sample).
    ``d_C`` and ``d_c`` are returned as zeros: the readout does not enter ``z*``.
    """
    cfg, cert, alpha = resolve(net, cfg)
    X, single = as_batch(x, net.r, "x")
    Z, _ = as_batch(z_star, net.n, "z_star")
    V, _ = as_batch(v, net.n, "v")
    if not X.shape[0] == Z.shape[0] == V.shape[0]:
        raise InvalidInputError("x, z_star and v batch sizes differ")
    U_pre = Z @ net.W.T + X @ net.U.T + net.b
    resid = np.max(np.abs(Z - net.activation(U_pre)) / cert.eta.eta, axis=1) if Z.size else np.zeros(0)
    if np.any(resid > residual_tol):
        raise ConvergenceError(f"z_star is not a fixed point (residual {resid.max():.3g})")
    D = net.activation.derivative(U_pre)
    W = net.W
    Wt, its, ratio = _adjoint(lambda w: (w * D) @ W, V, alpha, cert.eta.eta, adjoint_tol, cfg.max_iter)
    G = Wt * D
    d_x = G @ net.U
    grads = ParameterGradients(
        G.T @ Z, G.T @ X, G.sum(axis=0), np.zeros_like(net.C), np.zeros(net.q),
        d_x[0] if single else d_x,
    )
    grads.diagnostics = {"adjoint_iterations": its, "adjoint_ratio": ratio}
    return grads


def embedded_vjp(net: ImplicitNetwork, box, efp, v_lower, v_upper, cfg: SolveConfig | None = None,
                 adjoint_tol: float = 1e-13) -> ParameterGradients:
    """Pull back cotangents on ``(z_lower, z_upper)`` of the embedded fixed point."""
    cfg, cert, alpha = resolve(net, cfg)
    if not efp.all_converged:
        raise ConvergenceError("embedded fixed point did not converge")
    lower, upper = (box.lower, box.upper) if hasattr(box, "lower") else box
    XL, single = as_batch(lower, net.r, "box.lower")
    XU, _ = as_batch(upper, net.r, "box.upper")
    ZL, _ = as_batch(efp.z_lower, net.n, "z_lower")
    ZU, _ = as_batch(efp.z_upper, net.n, "z_upper")
    VL, _ = as_batch(v_lower, net.n, "v_lower")
    VU, _ = as_batch(v_upper, net.n, "v_upper")
    n = net.n
    M, N = metzler_split(net.W)
    Up, Um = sign_split(net.U)
    DL = net.activation.derivative(ZL @ M.T + ZU @ N.T + XL @ Up.T + XU @ Um.T + net.b)
    DU = net.activation.derivative(ZU @ M.T + ZL @ N.T + XU @ Up.T + XL @ Um.T + net.b)

    def pullback(w):
        gl, gu = w[:, :n] * DL, w[:, n:] * DU
        return np.hstack([gl @ M + gu @ N, gl @ N + gu @ M])

    dual_eta = np.concatenate([cert.eta.eta, cert.eta.eta])
    Wt, its, ratio = _adjoint(pullback, np.hstack([VL, VU]), alpha, dual_eta, adjoint_tol, cfg.max_iter)
    GL, GU = Wt[:, :n] * DL, Wt[:, n:] * DU
    dM = GL.T @ ZL + GU.T @ ZU
    dN = GL.T @ ZU + GU.T @ ZL
    dUp = GL.T @ XL + GU.T @ XU
    dUm = GL.T @ XU + GU.T @ XL
    dxl = GL @ Up + GU @ Um
    dxu = GL @ Um + GU @ Up
    if single:
        dxl, dxu = dxl[0], dxu[0]
    grads = ParameterGradients(
        np.where(metzler_mask(net.W), dM, dN),
        np.where(net.U >= 0, dUp, dUm),
        GL.sum(axis=0) + GU.sum(axis=0),
        np.zeros_like(net.C),
        np.zeros(net.q),
        dxl + dxu,
        dxl,
        dxu,
    )
    grads.diagnostics = {"adjoint_iterations": its, "adjoint_ratio": ratio}
    return grads


def loss_and_input_gradient(net: ImplicitNetwork, x, labels, cfg: SolveConfig | None = None):
    """Cross-entropy losses of ``f_N(x)`` and their gradients in ``x`` (row-wise)."""
    X, single = as_batch(x, net.r, "x")
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    for lab in labels:
        check_label(lab, net.q)
    rep = solve_fixed_point(net, X, cfg)
    if not np.all(rep.converged):
        raise ConvergenceError("fixed-point solve did not converge")
    Z = np.atleast_2d(rep.z_star)
    losses, g = cross_entropy_grad(output_map(net, Z), labels)
    grads = fixed_point_vjp(net, X, Z, g @ net.C, cfg)
    d_x = np.atleast_2d(grads.d_x)
    return (losses[0], d_x[0]) if single else (losses, d_x)


def loss_input_gradient(net: ImplicitNetwork, x, label, cfg: SolveConfig | None = None) -> np.ndarray:
    """Gradient in ``x`` of the cross-entropy of ``f_N(x)`` against ``label``."""
    return loss_and_input_gradient(net, x, label, cfg)[1]


def nominal_loss_gradients(net: ImplicitNetwork, X, labels, cfg: SolveConfig | None = None):
    """Summed cross-entropy over a batch with gradients for all parameters."""
    X, _ = as_batch(X, net.r, "X")
    rep = solve_fixed_point(net, X, cfg)
    if not np.all(rep.converged):
        raise ConvergenceError("fixed-point solve did not converge")
    Z = np.atleast_2d(rep.z_star)
    logits = output_map(net, Z)
    losses, g = cross_entropy_grad(logits, labels)
    grads = fixed_point_vjp(net, X, Z, g @ net.C, cfg)
    grads.d_C = g.T @ Z
    grads.d_c = g.sum(axis=0)
    return float(losses.sum()), grads, logits


@dataclass
class FDReport:
    """Finite-difference comparison; ``errors`` maps parameter names to relative errors.

    Relative error of a parameter array is ``max|a - fd| / max(max|a|, max|fd|, 1e-8)``.
    Reports with ``excluded=True`` sit next to a non-differentiable point and
    must not count towards pass/fail.
    """

    max_rel_error: float
    errors: dict
    excluded: bool = False
    reason: str = ""

    def passed(self, threshold: float) -> bool:
        return self.excluded or self.max_rel_error <= threshold


def relative_error(analytic, numeric) -> float:
    a = np.asarray(analytic, dtype=np.float64)
    f = np.asarray(numeric, dtype=np.float64)
    denom = max(float(np.max(np.abs(a), initial=0.0)), float(np.max(np.abs(f), initial=0.0)), 1e-8)
    return float(np.max(np.abs(a - f), initial=0.0)) / denom


def central_differences(fun, arrays: dict[str, np.ndarray], step: float) -> dict[str, np.ndarray]:
    """Central differences of scalar ``fun(arrays)`` with respect to every array entry."""
    out = {}
    for name, arr in arrays.items():
        grad = np.zeros_like(arr, dtype=np.float64)
        for idx in np.ndindex(arr.shape):
            orig = arr[idx]
            arr[idx] = orig + step
            fp = fun(arrays)
            arr[idx] = orig - step
            fm = fun(arrays)
            arr[idx] = orig
            grad[idx] = (fp - fm) / (2.0 * step)
        out[name] = grad
    return out


def _tight(cfg: SolveConfig | None) -> SolveConfig:
    cfg = cfg or SolveConfig()
    return SolveConfig(alpha=cfg.alpha, tol=1e-13, max_iter=max(cfg.max_iter, 200_000), eta=cfg.eta)


def _near_kink(net: ImplicitNetwork, pre: np.ndarray) -> bool:
    return net.activation.kind in ("relu", "leaky_relu") and bool(np.any(np.abs(pre) < KINK_TOL))


def finite_difference_check(net: ImplicitNetwork, x, label, step: float = 1e-6,
                            cfg: SolveConfig | None = None, skip_excluded: bool = False) -> FDReport:
    """Compare the implicit gradient of the cross-entropy loss with central differences.

    Covers ``W, U, b, C, c`` and the input ``x``. With ``skip_excluded`` a
    near-kink instance returns at once with a NaN error instead of being
    differenced.
    """
    if not step > 0:
        raise InvalidInputError(f"step must be positive, got {step}")
    cfg = _tight(cfg)
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    label = check_label(label, net.q)
    loss, grads, _ = nominal_loss_gradients(net, x[None, :], [label], cfg)
    z = np.atleast_2d(solve_fixed_point(net, x, cfg).z_star)[0]
    pre = net.W @ z + net.U @ x + net.b
    kink = _near_kink(net, pre)
    reason = "activation kink at the fixed point" if kink else ""
    if kink and skip_excluded:
        return FDReport(float("nan"), {}, True, reason)
    analytic = dict(grads.params(), x=np.atleast_2d(grads.d_x)[0])

    def fun(a):
        trial = net.replace(W=a["W"], U=a["U"], b=a["b"], C=a["C"], c=a["c"])
        return nominal_loss_gradients(trial, a["x"][None, :], [label], cfg)[0]

    arrays = {k: np.array(v, dtype=np.float64) for k, v in
              dict(W=net.W, U=net.U, b=net.b, C=net.C, c=net.c, x=x).items()}
    numeric = central_differences(fun, arrays, step)
    errors = {k: relative_error(analytic[k], numeric[k]) for k in numeric}
    return FDReport(max(errors.values()), errors, kink, reason)


def embedded_finite_difference_check(net: ImplicitNetwork, box, v_lower, v_upper, step: float = 1e-6,
                                     cfg: SolveConfig | None = None, skip_excluded: bool = False) -> FDReport:
    """Central-difference check of :func:`embedded_vjp` on ``v_l.z_lower + v_u.z_upper``.

    Covers ``W, U, b`` and both box endpoints. Entries of ``W``/``U`` within the
    kink tolerance of zero flip a split mask and exclude the report.
    ``skip_excluded`` works as in :func:`finite_difference_check`.
    """
    cfg = _tight(cfg)
    lower, upper = (box.lower, box.upper) if hasattr(box, "lower") else box
    lower = np.array(lower, dtype=np.float64)
    upper = np.array(upper, dtype=np.float64)
    v_lower = np.asarray(v_lower, dtype=np.float64)
    v_upper = np.asarray(v_upper, dtype=np.float64)
    efp = solve_embedded(net, (lower, upper), cfg)
    off = ~np.eye(net.n, dtype=bool)
    mask_kink = bool(np.any(np.abs(net.W[off]) < KINK_TOL) or np.any(np.abs(net.U) < KINK_TOL))
    M, N = metzler_split(net.W)
    Up, Um = sign_split(net.U)
    pre_l = M @ efp.z_lower + N @ efp.z_upper + Up @ lower + Um @ upper + net.b
    pre_u = M @ efp.z_upper + N @ efp.z_lower + Up @ upper + Um @ lower + net.b
    act_kink = _near_kink(net, np.concatenate([pre_l, pre_u]))
    # the lower end must stay strictly below the upper end under perturbation
    box_kink = bool(np.any(upper - lower < 2 * step))
    excluded = mask_kink or act_kink or box_kink
    reason = ", ".join(r for r, flag in (("split mask", mask_kink), ("activation kink", act_kink),
                                         ("degenerate box", box_kink)) if flag)
    if excluded and skip_excluded:
        return FDReport(float("nan"), {}, True, reason)
    grads = embedded_vjp(net, (lower, upper), efp, v_lower, v_upper, cfg)
    analytic = {"W": grads.d_W, "U": grads.d_U, "b": grads.d_b, "x_lower": grads.d_x_lower,
                "x_upper": grads.d_x_upper}

    def fun(a):
        trial = net.replace(W=a["W"], U=a["U"], b=a["b"])
        e = solve_embedded(trial, (a["x_lower"], a["x_upper"]), cfg)
        return float(v_lower @ e.z_lower + v_upper @ e.z_upper)

    arrays = {"W": np.array(net.W), "U": np.array(net.U), "b": np.array(net.b),
              "x_lower": lower.copy(), "x_upper": upper.copy()}
    numeric = central_differences(fun, arrays, step)
    errors = {k: relative_error(analytic[k], numeric[k]) for k in numeric}
    return FDReport(max(errors.values()), errors, excluded, reason)
