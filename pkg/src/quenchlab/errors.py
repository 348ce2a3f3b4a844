"""Exception hierarchy shared by all modules."""


class QuenchLabError(Exception):
    """Base class for package errors."""


class DomainError(QuenchLabError, ValueError):
    """Argument outside the domain of a function."""


class QuadratureError(QuenchLabError, ArithmeticError):
    """Adaptive quadrature failed to reach its tolerance."""


class ConditionCUndetermined(QuenchLabError):
    """Small-xi behaviour of a symbol could not be classified."""


class SizeError(QuenchLabError, ValueError):
    """Requested object would be too large to build."""


class CoverageError(QuenchLabError, ValueError):
    """Query point too close to the edge of a sampled box."""


class RangeError(QuenchLabError, OverflowError):
    """Floating point overflow in a closed-form expression."""


class RejectionCapError(QuenchLabError, RuntimeError):
    """Rejection sampler exceeded its retry budget."""


class ConvergenceError(QuenchLabError, RuntimeError):
    """Iterative solver did not converge."""


class StatisticalError(QuenchLabError, RuntimeError):
    """Monte Carlo sample too small for the requested estimate."""


class ConfigError(QuenchLabError, ValueError):
    """Invalid experiment configuration. ``key`` names the offending entry."""

    def __init__(self, message: str, key: str | None = None):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)
