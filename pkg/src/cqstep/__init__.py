"""Weighted and shifted BDF convolution quadrature for parabolic problems
with nonsmooth data, with smoothing, correction and a contour oracle."""

from .errors import (
    ConfigError,
    ContourError,
    CQStepError,
    GridTooSmallError,
    InvalidOrderError,
    QuadratureAccuracyError,
    RateUndefinedError,
    ShapeError,
    SingularSystemError,
    WeightConstraintError,
)
from .precision import DOUBLE, Double, Extended, get_precision
from .symbols import (
    SchemeOrder,
    SymbolCoefficients,
    base_coeffs,
    eval_symbol,
    power_coeffs,
    shifted_coeffs,
    weighted_coeffs,
)
from .spatial import (
    CollocationGrid,
    SpatialOperator,
    cgl_nodes,
    discrete_l2,
    laplacian_dirichlet,
)


__version__ = "0.1.0"
from .smoothing import SourceDescriptor, SourceTerm, TemporalExpr, jm_transform, sample_smoothed
from .stepper import ProblemSpec, SchemeKind, StepPlan, Trajectory, advance, build_plan, run
