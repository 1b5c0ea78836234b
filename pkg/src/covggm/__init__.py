"""Covariate-adjusted Gaussian graphical models.

Fits per-subject precision matrices of the form B0 + sum_h B_h u_h by
jointly convex nodewise sparse-group regressions, with cross-validated
tuning, synthetic-data generators and benchmark metrics.
"""

from .accel import BACKEND, USING_NUMBA
from .data import (
    CovariateKind,
    Dataset,
    PenaltyConfig,
    ScalingRecord,
    center_responses,
    infer_kinds,
    standardize_covariates,
    validate_dataset,
)
from .graph import (
    GraphModel,
    SubjectPrediction,
    SymmetrizationRule,
    edge_sets,
    predict_subject,
    symmetrize,
)
from .metrics import EvalReport, evaluate
from .nodewise import (
    InteractionDesign,
    NodewiseFit,
    build_interaction_design,
    estimate_sigma2,
    fit_node,
    rescale_to_theta,
)
from .pipeline import fit_graphical_model, replicate_benchmark
from .simulate import SimulationConfig, SimulationTruth, generate_dataset
from .solver import (
    SglProblem,
    SglSolution,
    SolverOptions,
    kkt_residual,
    make_problem,
    objective,
    soft_threshold,
    solve,
    solve_path,
)
from .tuning import CvResult, PenaltyGrid, cross_validate, lambda0_max, make_path

__version__ = "0.1.0"
