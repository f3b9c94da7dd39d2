"""Convex-penalized least squares with certified structural checks.

Estimators of the form ``argmin (1/n)|y - X b|_2^2 + 2 F(b)`` for a convex
penalty F (l1, group-l2, sorted-l1, cone-generated norms), together with
the geometric identities the fitted values satisfy (projection onto the
dual ball, 1-Lipschitz contraction, firm nonexpansiveness), RE-type design
constants, oracle error bounds, and seeded Monte Carlo verification of the
concentration they imply. See README.md for the CLI.
"""

__version__ = "0.1.0"

from .concentration import (
    ConcentrationReport,
    CoverageOutcome,
    MonteCarloConfig,
    SimulationResult,
    concentration_check,
    event_probability_check,
    oracle_coverage_check,
    simulate_prediction_errors,
    std_normal,
    std_normal_inverse,
)
from .constants import (
    ConeSpec,
    OracleBound,
    ReEstimate,
    best_sparse_approximation,
    oracle_bound,
    re_type_constant,
    recommended_tuning,
)
from .estimator import PenalizedLeastSquares
from .geometry import (
    DualBall,
    GeometryReport,
    contraction_check,
    dual_ball_project,
    projection_identity_check,
    tight_solver_config,
)
from .model import (
    DesignMatrix,
    Observation,
    Problem,
    as_design,
    check_column_normalization,
    sample_observation,
    scaled_norm,
)
from .penalties import (
    ConeNorm,
    GroupL2,
    GroupPartition,
    L1,
    Penalty,
    PolyhedralCone,
    SlopeWeights,
    SortedL1,
    slope_weights,
)
from .solvers import (
    SolverConfig,
    SolverResult,
    basic_inequality_check,
    duality_gap,
    objective_value,
    solve,
    stationarity_certificate,
)

__all__ = [
    "__version__",
    "ConcentrationReport",
    "ConeNorm",
    "ConeSpec",
    "CoverageOutcome",
    "DesignMatrix",
    "DualBall",
    "GeometryReport",
    "GroupL2",
    "GroupPartition",
    "L1",
    "MonteCarloConfig",
    "Observation",
    "OracleBound",
    "Penalty",
    "PenalizedLeastSquares",
    "PolyhedralCone",
    "Problem",
    "ReEstimate",
    "SimulationResult",
    "SlopeWeights",
    "SolverConfig",
    "SolverResult",
    "SortedL1",
    "as_design",
    "basic_inequality_check",
    "best_sparse_approximation",
    "check_column_normalization",
    "concentration_check",
    "contraction_check",
    "duality_gap",
    "dual_ball_project",
    "event_probability_check",
    "objective_value",
    "oracle_bound",
    "oracle_coverage_check",
    "projection_identity_check",
    "re_type_constant",
    "recommended_tuning",
    "sample_observation",
    "scaled_norm",
    "simulate_prediction_errors",
    "slope_weights",
    "solve",
    "stationarity_certificate",
    "std_normal",
    "std_normal_inverse",
    "tight_solver_config",
]
