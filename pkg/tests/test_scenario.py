"""Scenario configuration, seeding discipline, and channel statistics."""

import numpy as np
import pytest

from beamopt.linalg import frob2
from beamopt.scenario import (
    ScenarioConfig,
    init_beamformers,
    metanet_seed,
    noise_variance,
    sample_channels,
)


def _cfg(**kw):
    base = dict(n_tx=8, n_rx=2, n_streams=2, n_users=2)
    base.update(kw)
    return ScenarioConfig(**base)


def test_noise_variance_frozen_values():
    # sigma^2 = P 10^(-snr/10): P=1, 25 dB -> 10^-2.5
    assert noise_variance(_cfg(snr_db=25.0)) == 0.0031622776601683794
    assert noise_variance(_cfg(snr_db=0.0)) == 1.0
    assert noise_variance(_cfg(snr_db=10.0, total_power=5.0)) == pytest.approx(0.5)


def test_config_validation():
    with pytest.raises(ValueError):
        _cfg(n_users=0)
    with pytest.raises(ValueError):
        _cfg(n_streams=3)  # exceeds n_rx
    with pytest.raises(ValueError):
        _cfg(total_power=0.0)
    with pytest.raises(ValueError):
        _cfg(user_weights=(1.0,))  # wrong count
    with pytest.raises(ValueError):
        _cfg(user_weights=(1.0, -1.0))


def test_config_weights_default_and_dtype():
    cfg = _cfg()
    assert cfg.user_weights == (1.0, 1.0)
    w = cfg.weights
    assert w.dtype == np.float64 and np.array_equal(w, np.ones(2))


def test_overloaded_system_warns():
    with pytest.warns(UserWarning):
        ScenarioConfig(n_tx=4, n_rx=2, n_streams=2, n_users=4)


def test_channels_shape_and_determinism():
    cfg = _cfg(master_seed=7)
    h1 = sample_channels(cfg, 3)
    h2 = sample_channels(cfg, 3)
    assert h1.shape == (2, 2, 8)
    assert np.array_equal(h1, h2)
    assert not np.array_equal(h1, sample_channels(cfg, 4))
    assert not np.array_equal(h1, sample_channels(_cfg(master_seed=8), 3))


def test_channels_do_not_depend_on_snr():
    # solvers must see identical channels across the SNR sweep
    a = sample_channels(_cfg(snr_db=0.0), 0)
    b = sample_channels(_cfg(snr_db=30.0), 0)
    assert np.array_equal(a, b)


def test_channel_statistics_unit_variance():
    cfg = ScenarioConfig(n_tx=32, n_rx=8, n_streams=1, n_users=8)
    h = np.concatenate([sample_channels(cfg, r).ravel() for r in range(40)])
    assert abs(np.mean(h.real)) < 0.02 and abs(np.mean(h.imag)) < 0.02
    assert np.var(h.real) + np.var(h.imag) == pytest.approx(1.0, rel=0.03)


def test_init_beamformers_power_and_keying():
    cfg = _cfg(total_power=2.5, master_seed=1)
    v = init_beamformers(cfg, 0, realization_index=4)
    assert v.shape == (2, 8, 2)
    assert frob2(v) == pytest.approx(2.5, rel=1e-12)
    assert np.array_equal(v, init_beamformers(cfg, 0, realization_index=4))
    assert not np.array_equal(v, init_beamformers(cfg, 1, realization_index=4))
    assert not np.array_equal(v, init_beamformers(cfg, 0, realization_index=5))


def test_beamformer_and_channel_streams_are_independent():
    # same indices, different purpose tags: draws must differ
    cfg = ScenarioConfig(n_tx=4, n_rx=4, n_streams=1, n_users=1)
    h = sample_channels(cfg, 0)  # (1, 4, 4)
    v = init_beamformers(cfg, 0, realization_index=0)  # (1, 4, 1)
    assert not np.allclose(h[0][:, :1], v[0] * np.sqrt(frob2(h[0][:, :1])))


def test_metanet_seed_distinct_per_run():
    cfg = _cfg()
    states = {
        tuple(metanet_seed(cfg, r, s).generate_state(4))
        for r in range(3)
        for s in range(3)
    }
    assert len(states) == 9
