"""The update network: structure, initialization, backprop, persistence."""

import numpy as np
import pytest

from beamopt.metanet import (
    DEFAULT_META_LR,
    HIDDEN_WIDTH,
    LEAKY_SLOPE,
    dims_for,
    load_params,
    net_adam_ascent,
    net_adam_init,
    net_backward,
    net_forward,
    net_init,
    params_flatten,
    params_unflatten,
    save_params,
)


def _perturbed(dims, seed):
    # shift the zero output layer so there is something to differentiate
    rng = np.random.default_rng(seed)
    params = net_init(dims, seed)
    return params_unflatten(
        params_flatten(params) + 0.05 * rng.standard_normal(params.n_params),
        params,
    )


def test_dims_and_parameter_count():
    dims = dims_for(8, 2)
    assert dims == (32, 50, 50, 32)
    params = net_init(dims, 0)
    # 32*50+50 + 50*50+50 + 50*32+32
    assert params.n_params == 5832
    assert dims_for(2, 1) == (4, 50, 50, 4)


def test_init_structure():
    params = net_init(dims_for(4, 2), 123)
    bound1 = np.sqrt(6.0 / 16)
    bound2 = np.sqrt(6.0 / HIDDEN_WIDTH)
    assert np.max(np.abs(params.w1)) <= bound1
    assert np.max(np.abs(params.w2)) <= bound2
    assert not np.any(params.b1) and not np.any(params.b2)
    assert not np.any(params.w3) and not np.any(params.b3)
    assert params.slope == LEAKY_SLOPE
    # deterministic per seed
    again = net_init(dims_for(4, 2), 123)
    assert np.array_equal(params.w1, again.w1)
    other = net_init(dims_for(4, 2), 124)
    assert not np.array_equal(params.w1, other.w1)


def test_zero_output_layer_means_zero_update():
    params = net_init(dims_for(8, 2), 7)
    rng = np.random.default_rng(0)
    for _ in range(3):
        y, _ = net_forward(params, rng.standard_normal(32))
        assert not np.any(y)


def test_leaky_relu_slope():
    params = _perturbed(dims_for(2, 1), 1)
    x = np.array([1.0, -1.0, 0.5, -0.5])
    _, tape = net_forward(params, x)
    neg = tape.z1 < 0
    assert np.any(neg)
    assert np.allclose(tape.a1[neg], LEAKY_SLOPE * tape.z1[neg], rtol=1e-14)
    assert np.allclose(tape.a1[~neg], tape.z1[~neg], rtol=1e-14)


def test_backward_matches_finite_differences():
    params = _perturbed(dims_for(2, 1), 2)
    rng = np.random.default_rng(3)
    x = rng.standard_normal(4)
    dy = rng.standard_normal(4)
    y, tape = net_forward(params, x)
    grads, dx = net_backward(params, tape, dy)
    gflat = np.concatenate([
        grads.w1.ravel(), grads.b1.ravel(), grads.w2.ravel(),
        grads.b2.ravel(), grads.w3.ravel(), grads.b3.ravel(),
    ])
    flat = params_flatten(params)
    eps = 1e-6
    # spot-check 20 random parameter coordinates and all input coordinates
    for i in rng.choice(flat.size, size=20, replace=False):
        up, dn = flat.copy(), flat.copy()
        up[i] += eps
        dn[i] -= eps
        yp, _ = net_forward(params_unflatten(up, params), x)
        ym, _ = net_forward(params_unflatten(dn, params), x)
        fd = float(np.dot(dy, yp - ym)) / (2 * eps)
        assert gflat[i] == pytest.approx(fd, rel=1e-6, abs=1e-9)
    for i in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[i] += eps
        xm[i] -= eps
        yp, _ = net_forward(params, xp)
        ym, _ = net_forward(params, xm)
        fd = float(np.dot(dy, yp - ym)) / (2 * eps)
        assert dx[i] == pytest.approx(fd, rel=1e-6, abs=1e-9)


def test_flatten_roundtrip():
    params = _perturbed(dims_for(4, 1), 4)
    flat = params_flatten(params)
    back = params_unflatten(flat, params)
    for name in ("w1", "b1", "w2", "b2", "w3", "b3"):
        assert np.array_equal(getattr(back, name), getattr(params, name))
    with pytest.raises(ValueError):
        params_unflatten(flat[:-1], params)


def test_adam_ascent_moves_by_lr():
    # zero-initialized moments: first step is lr * sign(gradient)
    params = net_init(dims_for(2, 1), 5)
    y, tape = net_forward(params, np.ones(4))
    grads, _ = net_backward(params, tape, np.ones(4))
    state = net_adam_init(params)
    new, state = net_adam_ascent(params, grads, state, lr=DEFAULT_META_LR)
    delta = params_flatten(new) - params_flatten(params)
    moved = np.abs(delta) > 0
    assert np.all(np.abs(delta[moved]) <= DEFAULT_META_LR * (1 + 1e-12))
    assert state.step == 1


def test_save_load_roundtrip(tmp_path):
    params = _perturbed(dims_for(8, 2), 6)
    path = tmp_path / "net.txt"
    save_params(params, path)
    back = load_params(path)
    assert back.dims == params.dims
    assert back.slope == params.slope
    assert np.array_equal(params_flatten(back), params_flatten(params))


def test_load_rejects_garbage(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("not a parameter file\n")
    with pytest.raises(ValueError):
        load_params(path)


def test_init_validation():
    with pytest.raises(ValueError):
        net_init((4, 40, 50, 4), 0)  # hidden width is fixed
    with pytest.raises(ValueError):
        net_init((4, 50, 50), 0)
    with pytest.raises(ValueError):
        net_forward(net_init(dims_for(2, 1), 0), np.ones(5))
