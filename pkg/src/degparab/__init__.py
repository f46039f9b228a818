"""Degenerate parabolic problems on manifolds with a singular boundary end.

Singularity functions and collar coordinates, weighted Sobolev norms, the
transform of an R-degenerate operator into a uniformly parabolic one on a
half-line strip, a theta-scheme solver and a maximal-regularity probe.
"""

from .exceptions import (
    CheckFailed,
    DegparabError,
    DomainError,
    EllipticityRefusal,
    InvalidFunctionError,
    NumericalError,
    SolverError,
    UndefinedQuotientError,
    ValidationError,
)
from .singfun import Blend, Exponential, Power, Tabulated, is_strong_singularity, make_singularity, sigma, sigma_inv
from .geometry import CollarMetric, ModelGeometry, collar_metric, degeneration_weight, metric_coeffs, normal_frame
from .fields import Field, read_field_csv, write_field_csv
from .norms import NormSpec, transformed_norm, weighted_norm, full_norm
from .operators import (
    DegenerateBVP,
    TransformedProblem,
    apply_operator,
    check_anisotropic_ellipticity,
    check_bc_regularity,
    comparison_operator,
    make_operator,
    model_operator,
    transform,
)
from .solver import SolveConfig, SolveReport, convergence_study, solve
from .maxreg import MRExperiment, mr_quotient, mr_sweep
from .estimators import CollarTransformer, DegenerateParabolicSolver

__version__ = "0.1.0"

__all__ = [
    "CheckFailed",
    "DegparabError",
    "DomainError",
    "EllipticityRefusal",
    "InvalidFunctionError",
    "NumericalError",
    "SolverError",
    "UndefinedQuotientError",
    "ValidationError",
    "DegenerateBVP",
    "TransformedProblem",
    "apply_operator",
    "check_anisotropic_ellipticity",
    "check_bc_regularity",
    "comparison_operator",
    "make_operator",
    "model_operator",
    "transform",
    "Blend",
    "Exponential",
    "Power",
    "Tabulated",
    "is_strong_singularity",
    "make_singularity",
    "sigma",
    "sigma_inv",
    "CollarMetric",
    "ModelGeometry",
    "collar_metric",
    "degeneration_weight",
    "metric_coeffs",
    "normal_frame",
    "Field",
    "read_field_csv",
    "write_field_csv",
    "NormSpec",
    "transformed_norm",
    "weighted_norm",
    "full_norm",
    "SolveConfig",
    "SolveReport",
    "convergence_study",
    "solve",
    "MRExperiment",
    "mr_quotient",
    "mr_sweep",
    "CollarTransformer",
    "DegenerateParabolicSolver",
]
