"""Exception types shared across the package."""


class ResokitError(Exception):
    """Base class for numerical failures raised by this package."""


class StepUnderflowError(ResokitError):
    """Adaptive step size collapsed below its floor (stiff or invalid input)."""


class NoConvergenceError(ResokitError):
    """Newton iteration did not reach tolerance within the iteration budget."""


class SingularJacobianError(ResokitError):
    """The shooting Jacobian (DP^n - I) is numerically singular, typically at
    or very near a fold."""


class DegenerateOrbitError(ResokitError):
    """x(t) is constant along the orbit, so maxima counting is undefined."""


class StepCollapseError(ResokitError):
    """Continuation step reached its minimum without a converged corrector."""


class SwitchFailedError(ResokitError):
    """Branch switching at a pitchfork failed for every tried perturbation."""


class LostFoldConditionError(ResokitError):
    """Two-parameter continuation lost the bifurcation condition (extended
    Newton residual stagnated)."""


class NotApplicableError(ResokitError):
    """The requested test is undefined for this input (e.g. a pitchfork test
    on an asymmetric branch)."""


class ConfigError(ResokitError):
    """Invalid run configuration."""


class FileFormatError(ResokitError):
    """Serialized file has a missing or mismatched version header."""
