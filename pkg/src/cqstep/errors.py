"""Exception hierarchy. Configuration problems and solver failures are kept
apart so the CLI can map them to distinct exit codes."""


class CQStepError(Exception):
    """Base class for all errors raised by cqstep."""


class ConfigError(CQStepError, ValueError):
    """Invalid user configuration (CLI flags, INI files, parameters)."""


class InvalidOrderError(ConfigError):
    """Step number k or smoothing order m outside the supported range."""


class WeightConstraintError(ConfigError):
    """Weight beta below the admissible bound."""


class GridTooSmallError(ConfigError):
    """Too few collocation nodes."""


class ShapeError(CQStepError, ValueError):
    """Grid function does not match the operator size."""


class RateUndefinedError(CQStepError, ValueError):
    """Convergence rate requested from a nonpositive error."""


class SolverError(CQStepError, RuntimeError):
    """Numerical failure while marching or solving."""


class SingularSystemError(SolverError):
    """The per-step matrix (or a resolvent) could not be factored."""


class QuadratureAccuracyError(SolverError):
    """Quadrature for J^m f did not reach the requested tolerance."""


class ContourError(ConfigError):
    """Contour parameters outside the admissible set."""
