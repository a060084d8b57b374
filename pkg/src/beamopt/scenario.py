"""Scenario configuration, keyed channel sampling, and beamformer init.

Every random draw comes from a counter-keyed Philox stream: a
numpy.random.SeedSequence built from the master seed plus explicit integer
indices (purpose tag, realization, restart).  Any piece of an experiment
can therefore be reproduced bit for bit in isolation, independent of
execution order or worker count.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from beamopt.linalg import frob2

# Purpose tags: first element of the SeedSequence spawn key.
STREAM_CHANNEL = 0
STREAM_BEAMFORMER = 1
STREAM_METANET = 2


@dataclass(frozen=True)
class ScenarioConfig:
    """Dimensions, power budget, SNR, user weights, and seeding.

    n_tx transmit antennas serve n_users users with n_rx receive antennas
    and n_streams data streams each.  snr_db is the transmit-power to
    noise-power ratio; user_weights defaults to all ones.
    """

    n_tx: int
    n_rx: int
    n_streams: int
    n_users: int
    total_power: float = 1.0
    snr_db: float = 10.0
    user_weights: tuple = ()
    master_seed: int = 0

    def __post_init__(self):
        if min(self.n_tx, self.n_rx, self.n_streams, self.n_users) < 1:
            raise ValueError("all dimensions must be positive")
        if self.n_streams > min(self.n_tx, self.n_rx):
            raise ValueError("n_streams cannot exceed min(n_tx, n_rx)")
        if self.total_power <= 0.0:
            raise ValueError("total_power must be positive")
        if not self.user_weights:
            object.__setattr__(self, "user_weights", (1.0,) * self.n_users)
        else:
            object.__setattr__(
                self, "user_weights", tuple(float(w) for w in self.user_weights)
            )
        if len(self.user_weights) != self.n_users:
            raise ValueError(
                "need %d user weights, got %d" % (self.n_users, len(self.user_weights))
            )
        if min(self.user_weights) <= 0.0:
            raise ValueError("user weights must be positive")
        if self.n_users * self.n_streams > self.n_tx:
            warnings.warn(
                "overloaded system: n_users * n_streams = %d exceeds n_tx = %d"
                % (self.n_users * self.n_streams, self.n_tx),
                stacklevel=2,
            )

    @property
    def weights(self):
        return np.asarray(self.user_weights, dtype=np.float64)


def _stream(config, tag, *indices):
    ss = np.random.SeedSequence(config.master_seed, spawn_key=(tag,) + tuple(indices))
    return np.random.Generator(np.random.Philox(ss))


def metanet_seed(config, realization_index, restart_index):
    """SeedSequence for the update network's weight init of one run."""
    return np.random.SeedSequence(
        config.master_seed,
        spawn_key=(STREAM_METANET, realization_index, restart_index),
    )


def _complex_normal(rng, shape):
    z = rng.standard_normal(shape + (2,))
    return np.ascontiguousarray((z[..., 0] + 1j * z[..., 1]) * np.sqrt(0.5))


def sample_channels(config, realization_index):
    """One realization of K i.i.d. CN(0,1) Rayleigh channels, (K, n_rx, n_tx).

    Keyed by (master_seed, realization_index) only, so every solver sees the
    same channels for a given realization.
    """
    rng = _stream(config, STREAM_CHANNEL, realization_index)
    return _complex_normal(rng, (config.n_users, config.n_rx, config.n_tx))


def noise_variance(config):
    """sigma^2 = P * 10^(-snr_db/10); one shared noise power for all users."""
    return config.total_power * 10.0 ** (-config.snr_db / 10.0)


def init_beamformers(config, restart_index, realization_index=0):
    """Random CN(0,1) beamformers scaled onto the exact power budget.

    Keyed by (master_seed, realization_index, restart_index) so every
    algorithm starts a given (realization, restart) from the same point.
    Returns a (K, n_tx, n_streams) stack with frob2 equal to total_power.
    """
    rng = _stream(config, STREAM_BEAMFORMER, realization_index, restart_index)
    shape = (config.n_users, config.n_tx, config.n_streams)
    v = _complex_normal(rng, shape)
    if not v.any():  # probability zero; redraw once rather than divide by 0
        v = _complex_normal(rng, shape)
    return v * np.sqrt(config.total_power / frob2(v))
