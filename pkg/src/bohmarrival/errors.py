"""Exception types shared across the package."""


class BohmError(Exception):
    """Base class for all package errors."""


class NodalPoint(BohmError):
    """Density at or below the floor where a velocity or phase gradient is needed."""


class StepFailure(BohmError):
    """Adaptive integrator step size underflowed."""


class SamplingBoxError(BohmError):
    """Rejection sampling acceptance rate fell below the usable threshold."""


class QuadratureError(BohmError):
    """A quadrature did not reach its tolerance."""


class PreconditionError(BohmError, ValueError):
    """Inputs violate an operation's stated precondition."""


class OverlapError(PreconditionError):
    """Initial wave packets overlap, so which-path retrodiction is undefined."""


class GridMismatch(PreconditionError):
    """Distributions are not sampled on the same grid."""
