"""Meta-learned gradient descent: a network proposes the beamformer update
and trains itself online from the objective it is optimizing.

One iteration feeds each user's conjugate WSR gradient through the update
network, adds the proposed update to that user's beamformer, and rescales
the whole set onto the power sphere.  Every `window` iterations the summed
objective over the window is backpropagated through the unrolled chain
(truncated at the window start) and the network takes one Adam ascent step;
the window sum then resets.  Nothing is pre-trained: the network starts
from random initialization on every run.

Unrolled-chain conventions (in the stacked real view u = per-user
[Re, Im] blocks concatenated over users):

  * step:        p = u + delta(theta),  u' = c * p,  c = sqrt(P/|p|^2)
  * projection pullback (exact Jacobian):  lam_p = c * (lam - (p_hat.lam) p_hat)
  * window loss: sum of F at the window's pre-step iterates, so the
    window-start iterate is the truncation constant (zero theta-gradient)
    and the last produced iterate's F lands in the next window
  * detached inputs (default): the network input x = reim(grad F) is a
    constant during BPTT; with detach_inputs=False the input Jacobian term
    is added via a central-difference Hessian-vector product of the
    analytic gradient
"""

from dataclasses import dataclass, field
from time import perf_counter

import numpy as np

from beamopt.errors import DegenerateBeamformerError
from beamopt.linalg import frob2
from beamopt.metanet import (
    DEFAULT_META_LR,
    dims_for,
    net_adam_ascent,
    net_adam_init,
    net_backward,
    net_forward,
    net_init,
    zero_gradients,
)
from beamopt.objective import evaluate_wsr, wsr_value_and_gradient
from beamopt.scenario import init_beamformers, metanet_seed, noise_variance
from beamopt.trajectory import OpCounts, RunTrajectory

UPDATE_ORDERS = ("jacobi", "gauss_seidel")
REPORT_MODES = ("best_iterate", "last_iterate")
INPUT_ENCODINGS = ("raw", "log_magnitude")


@dataclass(frozen=True)
class MlgdConfig:
    """Iteration budget, window length, meta step size, and mode flags.

    input_encoding selects how the gradient is presented to the network:
    "raw" feeds the values directly, "log_magnitude" compresses each
    component to sign(x)*log1p(|x|) (identity-like near zero, logarithmic
    for large entries).
    """

    total_iters: int = 200
    window: int = 10
    meta_lr: float = DEFAULT_META_LR
    detach_inputs: bool = True
    update_order: str = "jacobi"
    report: str = "best_iterate"
    input_encoding: str = "raw"

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.total_iters < self.window:
            raise ValueError("total_iters must be >= window")
        if self.meta_lr <= 0.0:
            raise ValueError("meta_lr must be positive")
        if self.update_order not in UPDATE_ORDERS:
            raise ValueError("update_order must be one of %r" % (UPDATE_ORDERS,))
        if self.report not in REPORT_MODES:
            raise ValueError("report must be one of %r" % (REPORT_MODES,))
        if self.input_encoding not in INPUT_ENCODINGS:
            raise ValueError(
                "input_encoding must be one of %r" % (INPUT_ENCODINGS,)
            )


@dataclass
class WindowStep:
    """Everything one iteration recorded for the backward pass.

    Jacobi: one sub-step covering all users (scales/unit_pre have length 1,
    inputs/net_tapes have one entry per user).  Gauss-Seidel: K sub-steps,
    one per user, each with its own projection scale and pre-step state.
    """

    v: np.ndarray            # iterate the step started from
    wsr: float               # F at that iterate (this window's loss term)
    order: str
    inputs: list
    net_tapes: list
    scales: np.ndarray
    unit_pre: np.ndarray     # unit pre-projection direction(s), real view
    states: list = None      # gauss_seidel only: pre-sub-step iterates
    input_jac: list = None   # per-user encoding derivative diag, None if raw


@dataclass
class WindowTape:
    """Recorded steps and the accumulated window objective."""

    entries: list = field(default_factory=list)
    meta_loss: float = 0.0


def _flatten_users(arr):
    # stacked real view: per-user [Re, Im] blocks, users concatenated
    k, rows, cols = arr.shape
    out = np.empty(k * 2 * rows * cols)
    block = 2 * rows * cols
    for i in range(k):
        out[i * block:i * block + block // 2] = arr[i].real.ravel()
        out[i * block + block // 2:(i + 1) * block] = arr[i].imag.ravel()
    return out


def _unflatten_users(x, shape):
    k, rows, cols = shape
    n = rows * cols
    out = np.empty(shape, dtype=np.complex128)
    block = 2 * n
    for i in range(k):
        seg = x[i * block:(i + 1) * block]
        out[i] = (seg[:n] + 1j * seg[n:]).reshape(rows, cols)
    return out


def _reim_block(mat):
    return np.concatenate((mat.real.ravel(), mat.imag.ravel()))


def _encode_input(x, encoding):
    # returns (net input, d(encoded)/d(raw) diagonal or None for identity)
    if encoding == "raw":
        return x, None
    ax = np.abs(x)
    return np.sign(x) * np.log1p(ax), 1.0 / (1.0 + ax)


def _block_to_mat(x, rows, cols):
    n = rows * cols
    return (x[:n] + 1j * x[n:]).reshape(rows, cols)


def mlgd_iteration(h, v, params, sigma2, weights, total_power, tape, *,
                   update_order="jacobi", input_encoding="raw", counts=None):
    """One update of every user's beamformer; records onto the tape.

    Returns (V_next, tape).  The tape entry holds F at the incoming iterate
    (the window's loss term for this iteration) plus the quantities the
    backward pass needs.
    """
    if update_order not in UPDATE_ORDERS:
        raise ValueError("update_order must be one of %r" % (UPDATE_ORDERS,))
    if input_encoding not in INPUT_ENCODINGS:
        raise ValueError("input_encoding must be one of %r" % (INPUT_ENCODINGS,))
    k_users, n_tx, d = v.shape

    if update_order == "jacobi":
        wsr_in, _, g = wsr_value_and_gradient(h, v, sigma2, weights, counts)
        inputs = []
        tapes = []
        jacs = []
        delta = np.empty_like(v)
        for k in range(k_users):
            x, dj = _encode_input(_reim_block(g[k]), input_encoding)
            y, ft = net_forward(params, x)
            delta[k] = _block_to_mat(y, n_tx, d)
            inputs.append(x)
            tapes.append(ft)
            jacs.append(dj)
        pre = v + delta
        p2 = frob2(pre)
        if p2 <= 0.0:
            raise DegenerateBeamformerError("update drove the beamformers to zero")
        c = float(np.sqrt(total_power / p2))
        v_next = pre * c
        unit = _flatten_users(pre) / np.sqrt(p2)
        entry = WindowStep(
            v=v, wsr=wsr_in, order="jacobi", inputs=inputs, net_tapes=tapes,
            scales=np.array([c]), unit_pre=unit[None, :], input_jac=jacs,
        )
    else:
        cur = v
        wsr_in = None
        inputs = []
        tapes = []
        jacs = []
        scales = np.empty(k_users)
        units = np.empty((k_users, 2 * n_tx * d * k_users))
        states = []
        for k in range(k_users):
            wsr_cur, _, g = wsr_value_and_gradient(h, cur, sigma2, weights, counts)
            if k == 0:
                wsr_in = wsr_cur
            states.append(cur)
            x, dj = _encode_input(_reim_block(g[k]), input_encoding)
            y, ft = net_forward(params, x)
            pre = cur.copy()
            pre[k] += _block_to_mat(y, n_tx, d)
            p2 = frob2(pre)
            if p2 <= 0.0:
                raise DegenerateBeamformerError("update drove the beamformers to zero")
            c = float(np.sqrt(total_power / p2))
            cur = pre * c
            inputs.append(x)
            tapes.append(ft)
            jacs.append(dj)
            scales[k] = c
            units[k] = _flatten_users(pre) / np.sqrt(p2)
        v_next = cur
        entry = WindowStep(
            v=v, wsr=wsr_in, order="gauss_seidel", inputs=inputs,
            net_tapes=tapes, scales=scales, unit_pre=units, states=states,
            input_jac=jacs,
        )
    tape.entries.append(entry)
    tape.meta_loss += entry.wsr
    return v_next, tape


def _sphere_pullback(lam, unit, c):
    # transpose Jacobian of u' = c(p) * p through the power sphere
    return c * (lam - np.dot(unit, lam) * unit)


def _input_pullback(h, v, sigma2, weights, d_flat, counts=None):
    """Transposed input Jacobian applied to d: (d x / d u)^T d.

    x(u) is the stacked real view of the analytic gradient, whose Jacobian
    is half the (symmetric) real Hessian of the objective, so the pullback
    equals the directional derivative of x along d; evaluated by central
    finite differences (detach_inputs=False only).
    """
    dn = float(np.linalg.norm(d_flat))
    if dn == 0.0:
        return np.zeros_like(d_flat)
    w_dir = _unflatten_users(d_flat, v.shape)
    eps = 1e-6 * (1.0 + np.sqrt(frob2(v))) / dn
    _, _, gp = wsr_value_and_gradient(h, v + eps * w_dir, sigma2, weights, counts)
    _, _, gm = wsr_value_and_gradient(h, v - eps * w_dir, sigma2, weights, counts)
    return (_flatten_users(gp) - _flatten_users(gm)) / (2.0 * eps)


def meta_backward(tape, params, h, sigma2, weights, total_power, *,
                  detach_inputs=True, counts=None):
    """Gradient of the window objective w.r.t. the network parameters.

    Walks the recorded steps in reverse, carrying the adjoint of the
    current iterate in the stacked real view: pull it back through the
    power-sphere projection, branch a copy into the network (accumulating
    parameter gradients), then add the local loss term 2*reim(grad F) at
    every recorded iterate except the window start (the truncation
    constant).  The local gradients are recomputed from the recorded
    iterates rather than stored.
    """
    if not tape.entries:
        raise ValueError("cannot backpropagate an empty window")
    k_users, n_tx, d = tape.entries[0].v.shape
    block = 2 * n_tx * d
    acc = zero_gradients(params)
    lam = np.zeros(k_users * block)

    for j in range(len(tape.entries) - 1, -1, -1):
        e = tape.entries[j]
        if e.order == "jacobi":
            lam_p = _sphere_pullback(lam, e.unit_pre[0], e.scales[0])
            dx_all = np.empty(k_users * block) if not detach_inputs else None
            for k in range(k_users):
                seed = lam_p[k * block:(k + 1) * block]
                gk, dxk = net_backward(params, e.net_tapes[k], seed)
                acc.add_(gk)
                if not detach_inputs:
                    if e.input_jac is not None and e.input_jac[k] is not None:
                        dxk = dxk * e.input_jac[k]
                    dx_all[k * block:(k + 1) * block] = dxk
            lam = lam_p
            if not detach_inputs:
                lam = lam + _input_pullback(h, e.v, sigma2, weights, dx_all, counts)
        else:
            for k in range(k_users - 1, -1, -1):
                lam_p = _sphere_pullback(lam, e.unit_pre[k], e.scales[k])
                seed = lam_p[k * block:(k + 1) * block]
                gk, dxk = net_backward(params, e.net_tapes[k], seed)
                acc.add_(gk)
                lam = lam_p
                if not detach_inputs:
                    if e.input_jac is not None and e.input_jac[k] is not None:
                        dxk = dxk * e.input_jac[k]
                    d_full = np.zeros(k_users * block)
                    d_full[k * block:(k + 1) * block] = dxk
                    lam = lam + _input_pullback(
                        h, e.states[k], sigma2, weights, d_full, counts
                    )
        if j > 0:
            _, _, g_local = wsr_value_and_gradient(h, e.v, sigma2, weights, counts)
            lam = lam + 2.0 * _flatten_users(g_local)
    return acc


def run_mlgd(h, config, mcfg=None, *, realization_index=0, restart_index=0):
    """Full online run: solve the instance while training the network.

    A fresh network (keyed by seed/realization/restart) and fresh Adam
    state are created per run; exactly floor(total_iters/window) parameter
    updates happen, at iterations window, 2*window, ...; a partial final
    window triggers none.  Returns a RunTrajectory.
    """
    if mcfg is None:
        mcfg = MlgdConfig()
    sigma2 = noise_variance(config)
    weights = config.weights
    p_total = config.total_power
    n_iters = mcfg.total_iters

    t0 = perf_counter()
    params = net_init(
        dims_for(config.n_tx, config.n_streams),
        metanet_seed(config, realization_index, restart_index),
    )
    astate = net_adam_init(params)
    v = init_beamformers(config, restart_index, realization_index)
    counts = OpCounts()
    tape = WindowTape()
    hist = np.empty(n_iters)
    best_wsr = -np.inf
    best_v = v
    best_iter = 0
    err_abs = 0.0
    err_over = 0.0
    n_updates = 0

    for i in range(1, n_iters + 1):
        v_new, tape = mlgd_iteration(
            h, v, params, sigma2, weights, p_total, tape,
            update_order=mcfg.update_order,
            input_encoding=mcfg.input_encoding, counts=counts,
        )
        if i > 1:
            # F at the incoming iterate = post-step value of iteration i-1
            wsr_prev = tape.entries[-1].wsr
            hist[i - 2] = wsr_prev
            if wsr_prev > best_wsr:
                best_wsr, best_v, best_iter = wsr_prev, v, i - 1
        rel = frob2(v_new) / p_total - 1.0
        err_abs = max(err_abs, abs(rel))
        err_over = max(err_over, rel)
        v = v_new
        if len(tape.entries) == mcfg.window:
            grads = meta_backward(
                tape, params, h, sigma2, weights, p_total,
                detach_inputs=mcfg.detach_inputs, counts=counts,
            )
            params, astate = net_adam_ascent(params, grads, astate, mcfg.meta_lr)
            n_updates += 1
            tape = WindowTape()

    final = evaluate_wsr(h, v, sigma2, weights).wsr
    counts.hpd_factorizations += 2 * h.shape[0]
    hist[n_iters - 1] = final
    if final > best_wsr:
        best_wsr, best_v, best_iter = final, v, n_iters
    wall_ms = (perf_counter() - t0) * 1e3

    return RunTrajectory(
        algorithm="mlgd",
        wsr_history=hist,
        iterations=n_iters,
        wall_ms=wall_ms,
        final_wsr=final,
        best_wsr=best_wsr,
        best_iteration=best_iter,
        final_v=v,
        best_v=best_v,
        counts=counts,
        power_err_abs=err_abs,
        power_err_over=max(err_over, 0.0),
        realization=realization_index,
        restart=restart_index,
        n_theta_updates=n_updates,
    )
