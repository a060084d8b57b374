"""Power projection and the first-order baseline solvers (GD and Adam).

Both baselines do projected gradient ascent on the WSR: step in the
conjugate-gradient direction (Adam preconditions it in a stacked real
view), then rescale the whole beamformer set onto the power sphere.
"""

from dataclasses import dataclass, replace
from time import perf_counter

import numpy as np

from beamopt.errors import DegenerateBeamformerError
from beamopt.linalg import frob2, reim_flatten, reim_unflatten
from beamopt.objective import evaluate_wsr, wsr_value_and_gradient
from beamopt.scenario import init_beamformers, noise_variance
from beamopt.trajectory import OpCounts, RunTrajectory

DEFAULT_GD_LR = 0.01
DEFAULT_ADAM_LR = 0.01


def project_power(v, total_power):
    """Scale the whole set onto the power sphere: frob2(result) = P.

    A single common factor sqrt(P / frob2(V)), applied whether the set is
    over or under budget.  All-zero input has no direction to scale and
    raises DegenerateBeamformerError.
    """
    p = frob2(v)
    if p <= 0.0:
        raise DegenerateBeamformerError("cannot project an all-zero beamformer set")
    return v * np.sqrt(total_power / p)


@dataclass(frozen=True)
class AdamState:
    """First/second moment accumulators for one flat parameter vector."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(n):
    """Fresh AdamState for an n-dimensional real parameter vector."""
    return AdamState(m=np.zeros(n), v=np.zeros(n))


def adam_direction(state, grad):
    """One Adam update: bias-corrected ascent direction and the new state.

    direction = m_hat / (sqrt(v_hat) + eps), with eps added outside the
    square root.
    """
    t = state.step + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    direction = m_hat / (np.sqrt(v_hat) + state.eps)
    return direction, replace(state, m=m, v=v, step=t)


def gd_step(v, g, lr, total_power):
    """V + lr*G followed by the power projection."""
    return project_power(v + lr * g, total_power)


def adam_step(v, g, state, lr, total_power):
    """Adam ascent step in the stacked real view, then power projection."""
    flat = reim_flatten(v)
    direction, state = adam_direction(state, reim_flatten(g))
    v_new = reim_unflatten(flat + lr * direction, v.shape)
    return project_power(v_new, total_power), state


def run_first_order(h, config, method, lr=None, iters=200, *,
                    realization_index=0, restart_index=0):
    """Run GD or Adam for a fixed iteration budget; returns RunTrajectory.

    The fused value-and-gradient kernel evaluates F(V_i) while producing
    the step direction, so each recorded post-step value comes from the
    next iteration's evaluation; only the last iterate needs an extra rate
    evaluation.
    """
    if method not in ("gd", "adam"):
        raise ValueError("method must be 'gd' or 'adam'")
    if iters < 1:
        raise ValueError("iters must be >= 1")
    if lr is None:
        lr = DEFAULT_GD_LR if method == "gd" else DEFAULT_ADAM_LR
    sigma2 = noise_variance(config)
    weights = config.weights
    p_total = config.total_power

    t0 = perf_counter()
    v = init_beamformers(config, restart_index, realization_index)
    state = adam_init(2 * v.size) if method == "adam" else None
    counts = OpCounts()
    hist = np.empty(iters)
    best_wsr = -np.inf
    best_v = v
    best_iter = 0
    err_abs = 0.0
    err_over = 0.0

    for i in range(1, iters + 1):
        wsr_i, _, g = wsr_value_and_gradient(h, v, sigma2, weights, counts)
        if i > 1:
            # F(V_i) is the post-step value of iteration i-1
            hist[i - 2] = wsr_i
            if wsr_i > best_wsr:
                best_wsr, best_v, best_iter = wsr_i, v, i - 1
        if method == "gd":
            v = gd_step(v, g, lr, p_total)
        else:
            v, state = adam_step(v, g, state, lr, p_total)
        rel = frob2(v) / p_total - 1.0
        err_abs = max(err_abs, abs(rel))
        err_over = max(err_over, rel)

    final = evaluate_wsr(h, v, sigma2, weights).wsr
    counts.hpd_factorizations += 2 * h.shape[0]
    hist[iters - 1] = final
    if final > best_wsr:
        best_wsr, best_v, best_iter = final, v, iters
    wall_ms = (perf_counter() - t0) * 1e3

    return RunTrajectory(
        algorithm=method,
        wsr_history=hist,
        iterations=iters,
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
    )
