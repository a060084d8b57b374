"""MU-MIMO downlink transmit beamforming by weighted sum-rate maximization.

Three solver families over one objective: the WMMSE alternating
minimization baseline, projected first-order ascent (GD / Adam), and an
online meta-learned gradient solver whose update rule is a small network
trained while it solves.  A seeded benchmark harness sweeps SNR over
Rayleigh channel realizations and writes deterministic CSVs; the `bench`
console script drives it.

Numerical kernels run on a compiled (Cython) core when built, with a NumPy
fallback selected automatically (see BEAMOPT_BACKEND).
"""

from beamopt import errors
from beamopt._backend import active_backend
from beamopt.classic import (
    AdamState,
    adam_init,
    adam_step,
    gd_step,
    project_power,
    run_first_order,
)
from beamopt.harness import ExperimentPlan, report_complexity, run_experiment
from beamopt.linalg import (
    frob2,
    hermitian_transpose,
    logdet2_hpd,
    received_covariance,
    solve_hpd,
)
from beamopt.metanet import (
    MetaNetParams,
    dims_for,
    load_params,
    net_adam_ascent,
    net_backward,
    net_forward,
    net_init,
    save_params,
)
from beamopt.mlgd import (
    INPUT_ENCODINGS,
    MlgdConfig,
    meta_backward,
    mlgd_iteration,
    run_mlgd,
)
from beamopt.objective import (
    RateBreakdown,
    evaluate_wsr,
    wsr_gradient,
    wsr_gradient_fd,
)
from beamopt.scenario import (
    ScenarioConfig,
    init_beamformers,
    noise_variance,
    sample_channels,
)
from beamopt.trajectory import OpCounts, RunTrajectory
from beamopt.wmmse import (
    run_wmmse,
    update_beamformers,
    update_receivers,
    update_weights,
)

__version__ = "0.1.0"

__all__ = [
    "errors",
    "active_backend",
    "AdamState",
    "adam_init",
    "adam_step",
    "gd_step",
    "project_power",
    "run_first_order",
    "ExperimentPlan",
    "report_complexity",
    "run_experiment",
    "frob2",
    "hermitian_transpose",
    "logdet2_hpd",
    "received_covariance",
    "solve_hpd",
    "MetaNetParams",
    "dims_for",
    "load_params",
    "net_adam_ascent",
    "net_backward",
    "net_forward",
    "net_init",
    "save_params",
    "INPUT_ENCODINGS",
    "MlgdConfig",
    "meta_backward",
    "mlgd_iteration",
    "run_mlgd",
    "RateBreakdown",
    "evaluate_wsr",
    "wsr_gradient",
    "wsr_gradient_fd",
    "ScenarioConfig",
    "init_beamformers",
    "noise_variance",
    "sample_channels",
    "OpCounts",
    "RunTrajectory",
    "run_wmmse",
    "update_beamformers",
    "update_receivers",
    "update_weights",
]
