"""Exception hierarchy shared by the numerical and simulation layers."""


class LevyScaleError(Exception):
    """Base class for all package errors."""


class DomainError(LevyScaleError, ValueError):
    """An argument lies outside the domain of the operation."""


class RangeError(LevyScaleError, ValueError):
    """A requested value is not attained, e.g. beyond a finite L(0+)."""


class QuadratureError(LevyScaleError, ArithmeticError):
    """Quadrature failed to reach its tolerance."""

    def __init__(self, message, abserr=None):
        super().__init__(message)
        self.abserr = abserr


class EventCapError(LevyScaleError, RuntimeError):
    """A simulated path exceeded its event budget."""

    def __init__(self, message, incomplete=0):
        super().__init__(message)
        self.incomplete = incomplete


class InsufficientSignalError(LevyScaleError, ArithmeticError):
    """Too few grid pairs rise above Monte Carlo noise to fit a slope."""


class ConfigError(LevyScaleError, ValueError):
    """Invalid experiment configuration."""
