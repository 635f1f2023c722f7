"""Exception hierarchy shared by every module."""


class LevyHeatError(Exception):
    """Base class for all package errors."""


class ValidationError(LevyHeatError, ValueError):
    """Bad input: domain violation, malformed spec or config."""


class ExistenceGateError(ValidationError):
    """The scenario violates the existence theory and no override was given."""


class NumericalError(LevyHeatError):
    """A numerical procedure failed."""


class QuadratureError(NumericalError):
    """Adaptive quadrature did not converge."""


class ConvergenceError(NumericalError):
    """Picard iteration hit its iteration cap."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class DivergenceError(ConvergenceError):
    """Picard residuals grew over consecutive iterations."""
