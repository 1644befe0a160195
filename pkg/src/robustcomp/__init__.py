"""Robust stochastic solvers for convex compositional problems under
heavy-tailed noise, plus a desk-scale robust-regression experiment harness."""

__version__ = "0.1.0"

from .problem import Constants, ProblemSpec, composite_smoothness, full_objective
from .prox import Regularizer, l1, l2, prox_step, prox_step_ball, project_ball
from .robust_mean import RobustEstimate, group_counts, mom_scalar, rme_vector
from .mscg import MscgConfig, mscg_iterate, run_mscg, run_rmscg, theorem1_batch
from .rosc import (StageSchedule, TruncationState, make_schedule,
                   reference_estimates, run_rosc, run_rrosc, truncate_reference)
from .dro import (DroInstance, calibrate_constants, dro_inner_sample,
                  lse_grad, lse_value, make_dro_spec, make_synthetic)
from .data import (Dataset, LibsvmParseError, NoiseKind, corrupt_labels,
                   draw_noise, load_libsvm, noise_variance, pareto,
                   save_libsvm, sparse_noise, split_validation, student_t)
from .trace import RunTrace, TraceRow

__all__ = [name for name in dir() if not name.startswith("_")]
