"""Session fixtures for the two full-scale benchmark experiments.

Several acceptance checks (ratios, baseline ordering, feasibility audit,
determinism) read the same sweep, so it runs once per session.
"""

import time

import pytest

from beamopt.harness import ExperimentPlan, run_experiment
from beamopt.mlgd import MlgdConfig
from beamopt.scenario import ScenarioConfig


def lightly_loaded_plan(out_dir, workers=1, master_seed=0):
    """K=2 users at N_t=8 (half loaded), SNR 10 and 30 dB."""
    return ExperimentPlan(
        scenario=ScenarioConfig(
            n_tx=8, n_rx=2, n_streams=2, n_users=2, master_seed=master_seed,
        ),
        snr_list=(10.0, 30.0),
        n_realizations=100,
        n_restarts=10,
        mlgd=MlgdConfig(total_iters=200, window=10),
        first_order_iters=200,
        workers=workers,
        out_dir=out_dir,
        deterministic_timing=True,
    )


def fully_loaded_plan(master_seed):
    """K=4 users at N_t=8 with d=2 (K*d = N_t), SNR 25 dB."""
    return ExperimentPlan(
        scenario=ScenarioConfig(
            n_tx=8, n_rx=2, n_streams=2, n_users=4, master_seed=master_seed,
        ),
        snr_list=(25.0,),
        n_realizations=100,
        n_restarts=10,
        algorithms=("wmmse", "mlgd"),
        mlgd=MlgdConfig(total_iters=200, window=10),
        deterministic_timing=True,
    )


@pytest.fixture(scope="session")
def sweep_experiment(tmp_path_factory):
    """The K=2 sweep, run single-threaded with CSV output; timed."""
    out = str(tmp_path_factory.mktemp("sweep") / "run1")
    plan = lightly_loaded_plan(out)
    t0 = time.perf_counter()
    result = run_experiment(plan)
    wall_s = time.perf_counter() - t0
    return {"plan": plan, "result": result, "wall_s": wall_s, "out_dir": out}


class LoadedRunner:
    """Lazy per-seed cache of the fully loaded experiment."""

    def __init__(self):
        self.results = {}

    def run(self, master_seed):
        if master_seed not in self.results:
            self.results[master_seed] = run_experiment(
                fully_loaded_plan(master_seed)
            )
        return self.results[master_seed]


@pytest.fixture(scope="session")
def loaded_runner():
    return LoadedRunner()
