"""Weighted sum rate objective, its Wirtinger gradient, and an FD oracle.

Rates are in bits.  User k's rate is evaluated as

    R_k = log2 det(A_k) - log2 det(B_k),
    A_k = sigma^2 I + sum_r H_k V_r V_r^H H_k^H,
    B_k = A_k - (H_k V_k)(H_k V_k)^H,

which equals the usual log2 det(I + H V_k V_k^H H^H B_k^{-1}) but needs one
covariance pair per user.  The gradient convention is the conjugate
(Wirtinger) derivative G_k = dF/dV_k^*, the steepest-ascent direction under
dF = 2 Re Tr(G^H dV); the 1/ln2 factor keeps it consistent with bits.
"""

from dataclasses import dataclass

import numpy as np

from beamopt._backend import kernels as _kern


@dataclass
class RateBreakdown:
    """Per-user rates, their weighted sum, and the covariance pair stacks."""

    rates: np.ndarray
    wsr: float
    cov_full: np.ndarray
    cov_interference: np.ndarray


def _coerce(h, v, sigma2, weights):
    h = np.ascontiguousarray(h, dtype=np.complex128)
    v = np.ascontiguousarray(v, dtype=np.complex128)
    if h.ndim != 3:
        raise ValueError("channel stack must be (K, n_rx, n_tx)")
    if v.ndim != 3:
        raise ValueError("beamformer stack must be (K, n_tx, d)")
    if v.shape[0] != h.shape[0] or v.shape[1] != h.shape[2]:
        raise ValueError(
            "beamformer stack %r does not match channel stack %r"
            % (v.shape, h.shape)
        )
    w = np.ascontiguousarray(weights, dtype=np.float64)
    if w.shape != (h.shape[0],):
        raise ValueError("need one weight per user")
    if (w <= 0.0).any():
        raise ValueError("user weights must be positive")
    sigma2 = float(sigma2)
    if sigma2 <= 0.0:
        raise ValueError("noise variance must be positive")
    return h, v, sigma2, w


def evaluate_wsr(h, v, sigma2, weights):
    """Weighted sum rate and per-user breakdown at beamformers V."""
    h, v, sigma2, w = _coerce(h, v, sigma2, weights)
    rates, a_all, b_all = _kern.wsr_rates(h, v, sigma2)
    return RateBreakdown(rates, float(np.dot(w, rates)), a_all, b_all)


def wsr_value_and_gradient(h, v, sigma2, weights, counts=None):
    """(wsr, per-user rates, conjugate gradient) in one fused evaluation."""
    h, v, sigma2, w = _coerce(h, v, sigma2, weights)
    rates, grad = _kern.wsr_value_grad(h, v, sigma2, w)
    if counts is not None:
        # fixed per-call kernel structure: A_k and B_k factored once per
        # user, 8 complex matrix products per user (see _pykernels)
        k = h.shape[0]
        counts.hpd_factorizations += 2 * k
        counts.matmuls += 8 * k
    return float(np.dot(w, rates)), rates, grad


def wsr_gradient(h, v, sigma2, weights):
    """Conjugate (Wirtinger) gradient of the WSR, shape (K, n_tx, d)."""
    h, v, sigma2, w = _coerce(h, v, sigma2, weights)
    _, grad = _kern.wsr_value_grad(h, v, sigma2, w)
    return grad


def wsr_gradient_fd(h, v, sigma2, weights, step=1e-5):
    """Central finite-difference gradient oracle (slow; tests only).

    Perturbs each real and imaginary entry separately:
    Re G[m,n] = (F(V + e) - F(V - e)) / (4 step) with e = step on the real
    part, and likewise with e = 1j*step for Im G.  The factor 4 (not 2)
    matches the conjugate-gradient convention dF = 2 Re Tr(G^H dV).
    """
    if not 1e-7 <= step <= 1e-4:
        raise ValueError("step must lie in [1e-7, 1e-4]")
    h, v, sigma2, w = _coerce(h, v, sigma2, weights)
    grad = np.zeros_like(v)
    for k in range(v.shape[0]):
        for m in range(v.shape[1]):
            for n in range(v.shape[2]):
                for comp in (1.0, 1.0j):
                    vp = v.copy()
                    vp[k, m, n] += step * comp
                    vm = v.copy()
                    vm[k, m, n] -= step * comp
                    fp = evaluate_wsr(h, vp, sigma2, w).wsr
                    fm = evaluate_wsr(h, vm, sigma2, w).wsr
                    grad[k, m, n] += comp * ((fp - fm) / (4.0 * step))
    return grad
