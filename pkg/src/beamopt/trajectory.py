"""Per-run trajectory record and operation counters shared by all solvers."""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class OpCounts:
    """Structural operation counters, incremented by the solver wrappers.

    hpd_factorizations counts Cholesky factorizations (each followed by its
    pair of triangular solves); matmuls counts complex matrix-matrix
    products inside kernels, Gram products included (the update network's
    real matvecs are not matrix products and are not counted);
    bisection_searches counts power-multiplier searches entered,
    bisection_evals the factorize-and-solve evaluations they performed.
    """

    hpd_factorizations: int = 0
    matmuls: int = 0
    bisection_searches: int = 0
    bisection_evals: int = 0

    def merge(self, other):
        self.hpd_factorizations += other.hpd_factorizations
        self.matmuls += other.matmuls
        self.bisection_searches += other.bisection_searches
        self.bisection_evals += other.bisection_evals


@dataclass
class RunTrajectory:
    """Everything one solver run produced.

    wsr_history[t] is the objective after iteration t+1's update, in bits;
    best_iteration is the 1-based iteration whose post-update iterate
    achieved best_wsr.  power_err_abs / power_err_over are the worst
    relative power-budget violations seen over all recorded iterates
    (|frob2 - P|/P and max(0, frob2 - P)/P respectively).
    """

    algorithm: str
    wsr_history: np.ndarray
    iterations: int
    wall_ms: float
    final_wsr: float
    best_wsr: float
    best_iteration: int
    final_v: np.ndarray
    best_v: np.ndarray
    counts: OpCounts = field(default_factory=OpCounts)
    power_err_abs: float = 0.0
    power_err_over: float = 0.0
    realization: int = 0
    restart: int = 0
    n_theta_updates: int = 0

    def reported(self, report="best_iterate"):
        """The headline WSR under the given reporting rule."""
        if report == "best_iterate":
            return self.best_wsr
        if report == "last_iterate":
            return self.final_wsr
        raise ValueError("unknown report mode: %r" % report)
