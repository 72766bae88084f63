"""Inexact proximal augmented Lagrangian method with self-adaptive inner budgets."""

from .core import (
    ConfigurationError,
    ConvergenceTrace,
    OuterParams,
    OuterState,
    compute_M,
    estimate_eps0,
    inner_budget,
    ipalm_kkt_solve,
    ipalm_solve,
    multiplier_update,
)
from .diagnostics import GapCertificate, ErrorReport, duality_gap_bound, error_report, kkt_bounds
from .estimators import BasisPursuitRegressor, FusedLassoRegressor, L1SoftMarginSVC, LeastAbsoluteDeviation
from .problem import (
    CompositeProblem,
    Constraint,
    NonsmoothPiece,
    RowBlock,
    SmoothHalfSquared,
    SubproblemOracle,
)
from .problems import build_problem, normalize_rows, parse_libsvm, synthetic_instance
from .prox import (
    AbsSum,
    Ball,
    Box,
    HalfSquaredL2,
    HingeSum,
    NonNegativeOrthant,
    Point,
    WeightedL1,
    Zero,
    lipschitz_constant,
    project,
    prox,
    prox_shifted_quadratic,
)
from .smoothing import DualPoint, HSpec, lambda_map, smoothed_value
from .solvers import InnerSolverConfig, estimate_K
from .sparse import SparseMatrix, apply, column_squared_norms, estimate_spectral_norm

__all__ = [
    "AbsSum",
    "apply",
    "Ball",
    "BasisPursuitRegressor",
    "Box",
    "build_problem",
    "column_squared_norms",
    "CompositeProblem",
    "compute_M",
    "ConfigurationError",
    "Constraint",
    "ConvergenceTrace",
    "duality_gap_bound",
    "DualPoint",
    "error_report",
    "ErrorReport",
    "estimate_eps0",
    "estimate_K",
    "estimate_spectral_norm",
    "FusedLassoRegressor",
    "GapCertificate",
    "HalfSquaredL2",
    "HingeSum",
    "HSpec",
    "inner_budget",
    "InnerSolverConfig",
    "ipalm_kkt_solve",
    "ipalm_solve",
    "kkt_bounds",
    "L1SoftMarginSVC",
    "lambda_map",
    "LeastAbsoluteDeviation",
    "lipschitz_constant",
    "multiplier_update",
    "NonNegativeOrthant",
    "NonsmoothPiece",
    "normalize_rows",
    "OuterParams",
    "OuterState",
    "parse_libsvm",
    "Point",
    "project",
    "prox",
    "prox_shifted_quadratic",
    "RowBlock",
    "smoothed_value",
    "SmoothHalfSquared",
    "SparseMatrix",
    "SubproblemOracle",
    "synthetic_instance",
    "WeightedL1",
    "Zero",
]

__version__ = "0.1.0"
