"""Online meta-learned solver: schedule, BPTT oracle, run properties."""

import numpy as np
import pytest

from beamopt.linalg import frob2
from beamopt.metanet import dims_for, net_forward, net_init, params_flatten, params_unflatten
from beamopt.mlgd import (
    MlgdConfig,
    WindowTape,
    meta_backward,
    mlgd_iteration,
    run_mlgd,
)
from beamopt.objective import evaluate_wsr
from beamopt.scenario import (
    ScenarioConfig,
    init_beamformers,
    noise_variance,
    sample_channels,
)


def _tiny():
    cfg = ScenarioConfig(n_tx=2, n_rx=1, n_streams=1, n_users=1,
                         snr_db=10.0, master_seed=0)
    h = sample_channels(cfg, 0)
    v0 = init_beamformers(cfg, 0, 0)
    return cfg, h, v0, noise_variance(cfg), cfg.weights


def _perturbed_params(dims, seed):
    rng = np.random.default_rng(seed)
    params = net_init(dims, seed)
    return params_unflatten(
        params_flatten(params) + 0.05 * rng.standard_normal(params.n_params),
        params,
    )


def _unrolled_loss_jacobi(theta_flat, like, h, v0, s2, w, p_total, frozen_inputs):
    # window objective with the recorded network inputs held fixed
    p = params_unflatten(theta_flat, like)
    k_users, n_tx, d = v0.shape
    n = n_tx * d
    v = v0
    loss = 0.0
    for step_inputs in frozen_inputs:
        loss += evaluate_wsr(h, v, s2, w).wsr
        delta = np.empty_like(v)
        for k, xk in enumerate(step_inputs):
            y, _ = net_forward(p, xk)
            delta[k] = (y[:n] + 1j * y[n:]).reshape(n_tx, d)
        pre = v + delta
        v = pre * np.sqrt(p_total / frob2(pre))
    return loss


def _unrolled_loss_gs(theta_flat, like, h, v0, s2, w, p_total, frozen_inputs):
    # gauss-seidel variant: one projection per user sub-step
    p = params_unflatten(theta_flat, like)
    k_users, n_tx, d = v0.shape
    n = n_tx * d
    v = v0
    loss = 0.0
    for step_inputs in frozen_inputs:
        loss += evaluate_wsr(h, v, s2, w).wsr
        cur = v
        for k, xk in enumerate(step_inputs):
            y, _ = net_forward(p, xk)
            pre = cur.copy()
            pre[k] += (y[:n] + 1j * y[n:]).reshape(n_tx, d)
            cur = pre * np.sqrt(p_total / frob2(pre))
        v = cur
    return loss


def test_config_validation():
    with pytest.raises(ValueError):
        MlgdConfig(window=0)
    with pytest.raises(ValueError):
        MlgdConfig(total_iters=5, window=10)
    with pytest.raises(ValueError):
        MlgdConfig(meta_lr=0.0)
    with pytest.raises(ValueError):
        MlgdConfig(update_order="chaotic")
    with pytest.raises(ValueError):
        MlgdConfig(report="median")
    with pytest.raises(ValueError):
        MlgdConfig(input_encoding="tanh")


def test_first_window_is_a_fixed_point():
    # zero output layer: V stays put until the first parameter update
    cfg = ScenarioConfig(n_tx=4, n_rx=2, n_streams=2, n_users=2,
                         snr_db=10.0, master_seed=1)
    h = sample_channels(cfg, 0)
    v0 = init_beamformers(cfg, 0, 0)
    f0 = evaluate_wsr(h, v0, noise_variance(cfg), cfg.weights).wsr
    traj = run_mlgd(h, cfg, MlgdConfig(total_iters=20, window=5))
    assert np.allclose(traj.wsr_history[:5], f0, rtol=1e-12)
    assert traj.n_theta_updates == 4


def test_update_schedule_floor():
    cfg = ScenarioConfig(n_tx=2, n_rx=1, n_streams=1, n_users=1,
                         snr_db=5.0, master_seed=2)
    h = sample_channels(cfg, 0)
    traj = run_mlgd(h, cfg, MlgdConfig(total_iters=23, window=5))
    assert traj.n_theta_updates == 4  # partial final window triggers none
    assert traj.iterations == 23


def test_iteration_records_preserve_power():
    cfg, h, v0, s2, w = _tiny()
    params = _perturbed_params(dims_for(2, 1), 3)
    tape = WindowTape()
    v = v0
    for _ in range(4):
        v, tape = mlgd_iteration(h, v, params, s2, w, cfg.total_power, tape)
        assert frob2(v) == pytest.approx(cfg.total_power, rel=1e-12)
    assert len(tape.entries) == 4
    assert tape.meta_loss == pytest.approx(
        sum(e.wsr for e in tape.entries), rel=1e-14
    )
    # window loss terms are F at the incoming iterates
    assert tape.entries[0].wsr == pytest.approx(
        evaluate_wsr(h, v0, s2, w).wsr, rel=1e-14
    )


def test_meta_gradient_matches_unrolled_fd():
    cfg, h, v0, s2, w = _tiny()
    params = _perturbed_params(dims_for(2, 1), 4)
    tape = WindowTape()
    v = v0
    for _ in range(2):
        v, tape = mlgd_iteration(h, v, params, s2, w, cfg.total_power, tape)
    grads = meta_backward(tape, params, h, s2, w, cfg.total_power)
    gflat = np.concatenate([
        grads.w1.ravel(), grads.b1.ravel(), grads.w2.ravel(),
        grads.b2.ravel(), grads.w3.ravel(), grads.b3.ravel(),
    ])
    frozen = [list(e.inputs) for e in tape.entries]
    flat = params_flatten(params)
    rng = np.random.default_rng(5)
    eps = 1e-5
    for i in rng.choice(flat.size, size=30, replace=False):
        up, dn = flat.copy(), flat.copy()
        up[i] += eps
        dn[i] -= eps
        fd = (
            _unrolled_loss_jacobi(up, params, h, v0, s2, w, cfg.total_power, frozen)
            - _unrolled_loss_jacobi(dn, params, h, v0, s2, w, cfg.total_power, frozen)
        ) / (2 * eps)
        assert gflat[i] == pytest.approx(fd, rel=1e-4, abs=1e-10)


def test_meta_gradient_gauss_seidel_matches_unrolled_fd():
    cfg = ScenarioConfig(n_tx=2, n_rx=1, n_streams=1, n_users=2,
                         snr_db=10.0, master_seed=6)
    h = sample_channels(cfg, 0)
    v0 = init_beamformers(cfg, 0, 0)
    s2 = noise_variance(cfg)
    w = cfg.weights
    params = _perturbed_params(dims_for(2, 1), 7)
    tape = WindowTape()
    v = v0
    for _ in range(2):
        v, tape = mlgd_iteration(h, v, params, s2, w, cfg.total_power, tape,
                                 update_order="gauss_seidel")
    grads = meta_backward(tape, params, h, s2, w, cfg.total_power)
    gflat = np.concatenate([
        grads.w1.ravel(), grads.b1.ravel(), grads.w2.ravel(),
        grads.b2.ravel(), grads.w3.ravel(), grads.b3.ravel(),
    ])
    frozen = [list(e.inputs) for e in tape.entries]
    flat = params_flatten(params)
    rng = np.random.default_rng(8)
    eps = 1e-5
    for i in rng.choice(flat.size, size=30, replace=False):
        up, dn = flat.copy(), flat.copy()
        up[i] += eps
        dn[i] -= eps
        fd = (
            _unrolled_loss_gs(up, params, h, v0, s2, w, cfg.total_power, frozen)
            - _unrolled_loss_gs(dn, params, h, v0, s2, w, cfg.total_power, frozen)
        ) / (2 * eps)
        assert gflat[i] == pytest.approx(fd, rel=1e-4, abs=1e-10)


def test_meta_gradient_with_live_inputs():
    # detach_inputs=False adds the input-Jacobian term (FD Hessian-vector
    # products), so compare against FD of the fully live unrolled loss
    cfg, h, v0, s2, w = _tiny()
    params = _perturbed_params(dims_for(2, 1), 9)
    tape = WindowTape()
    v = v0
    for _ in range(2):
        v, tape = mlgd_iteration(h, v, params, s2, w, cfg.total_power, tape)
    grads = meta_backward(tape, params, h, s2, w, cfg.total_power,
                          detach_inputs=False)
    gflat = np.concatenate([
        grads.w1.ravel(), grads.b1.ravel(), grads.w2.ravel(),
        grads.b2.ravel(), grads.w3.ravel(), grads.b3.ravel(),
    ])

    from beamopt.objective import wsr_value_and_gradient

    def live_loss(theta_flat):
        p = params_unflatten(theta_flat, params)
        v = v0
        loss = 0.0
        for _ in range(2):
            loss += evaluate_wsr(h, v, s2, w).wsr
            _, _, g = wsr_value_and_gradient(h, v, s2, w)
            x = np.concatenate((g[0].real.ravel(), g[0].imag.ravel()))
            y, _ = net_forward(p, x)
            pre = v + (y[:2] + 1j * y[2:]).reshape(1, 2, 1)
            v = pre * np.sqrt(cfg.total_power / frob2(pre))
        return loss

    flat = params_flatten(params)
    rng = np.random.default_rng(10)
    eps = 1e-5
    for i in rng.choice(flat.size, size=20, replace=False):
        up, dn = flat.copy(), flat.copy()
        up[i] += eps
        dn[i] -= eps
        fd = (live_loss(up) - live_loss(dn)) / (2 * eps)
        assert gflat[i] == pytest.approx(fd, rel=1e-3, abs=1e-8)


def test_empty_window_backward_raises():
    cfg, h, v0, s2, w = _tiny()
    params = net_init(dims_for(2, 1), 0)
    with pytest.raises(ValueError):
        meta_backward(WindowTape(), params, h, s2, w, cfg.total_power)


def test_input_encoding_log_magnitude():
    from beamopt.mlgd import _encode_input

    x = np.array([0.0, 3.0, -3.0, 100.0])
    enc, jac = _encode_input(x, "log_magnitude")
    assert np.allclose(enc, np.sign(x) * np.log1p(np.abs(x)), rtol=1e-14)
    # elementwise derivative vs finite differences
    eps = 1e-7
    for i in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[i] += eps
        xm[i] -= eps
        fd = (_encode_input(xp, "log_magnitude")[0][i]
              - _encode_input(xm, "log_magnitude")[0][i]) / (2 * eps)
        assert jac[i] == pytest.approx(fd, rel=1e-6)
    raw, jac_raw = _encode_input(x, "raw")
    assert raw is x and jac_raw is None


def test_run_with_log_encoding_and_gauss_seidel():
    cfg = ScenarioConfig(n_tx=4, n_rx=2, n_streams=2, n_users=2,
                         snr_db=10.0, master_seed=11)
    h = sample_channels(cfg, 0)
    for mcfg in (
        MlgdConfig(total_iters=30, window=5, input_encoding="log_magnitude"),
        MlgdConfig(total_iters=30, window=5, update_order="gauss_seidel"),
    ):
        traj = run_mlgd(h, cfg, mcfg)
        assert traj.iterations == 30
        assert traj.n_theta_updates == 6
        assert traj.power_err_abs <= 1e-12
        assert np.isfinite(traj.wsr_history).all()


def test_run_determinism_and_restart_keying():
    cfg = ScenarioConfig(n_tx=4, n_rx=2, n_streams=2, n_users=2,
                         snr_db=10.0, master_seed=12)
    h = sample_channels(cfg, 1)
    mcfg = MlgdConfig(total_iters=40, window=10)
    a = run_mlgd(h, cfg, mcfg, realization_index=1, restart_index=0)
    b = run_mlgd(h, cfg, mcfg, realization_index=1, restart_index=0)
    assert np.array_equal(a.wsr_history, b.wsr_history)
    c = run_mlgd(h, cfg, mcfg, realization_index=1, restart_index=1)
    assert not np.array_equal(a.wsr_history, c.wsr_history)


def test_learning_escapes_the_start():
    # after enough updates the learned rule should improve on the fixed
    # point it starts from, on most instances
    improved = 0
    trials = 12
    for r in range(trials):
        cfg = ScenarioConfig(n_tx=8, n_rx=2, n_streams=2, n_users=4,
                             snr_db=25.0, master_seed=13)
        h = sample_channels(cfg, r)
        traj = run_mlgd(h, cfg, MlgdConfig(total_iters=200, window=10),
                        realization_index=r)
        if traj.best_wsr >= traj.wsr_history[0] + 0.5:
            improved += 1
    assert improved >= int(0.9 * trials)
