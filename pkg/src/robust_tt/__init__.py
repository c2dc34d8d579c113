"""Robust recovery of low-TT-rank tensors from outlier-corrupted linear measurements."""

from .analysis import (
    FactorDistanceReport,
    factor_distance,
    full_regularity_probe,
    distance_bounds_check,
    recovery_error,
    regularity_probe,
)
from .errors import ConfigurationError, RetractionError, SolverAbort, StructureError
from .manifold import polar_retract, stiefel_project
from .sensing import (
    CorruptionModel,
    GaussianEnsemble,
    Problem,
    adjoint,
    apply,
    corrupt,
    make_problem,
    rip_probe,
    sharpness_probe,
)
from .solvers import (
    SolverConfig,
    StepSchedule,
    TraceRecord,
    factor_subgradients,
    frsubgm_run,
    full_subgradient,
    loss_l1,
    psubgm_run,
    theoretical_schedule_frsubgm,
    theoretical_schedule_psubgm,
    truncated_spectral_init,
)
from .tt import TTTensor, left_orthogonalize, random_tt, spectral_summary, tt_svd, tt_to_dense

__version__ = "0.1.0"
