"""Exception types raised across the package."""


class TrimLStatError(Exception):
    """Base class for all package errors."""


class ParameterError(TrimLStatError, ValueError):
    """Distribution or weight parameters are invalid."""


class DomainError(TrimLStatError, ValueError):
    """An argument lies outside the domain where a quantity is defined."""


class TrimError(TrimLStatError, ValueError):
    """Trimming counts or limits violate the heavy-trimming regime."""


class EmptySampleError(TrimLStatError, ValueError):
    pass


class ShapeError(TrimLStatError, ValueError):
    pass


class ContractError(TrimLStatError, ValueError):
    """Input breaks a documented precondition (e.g. an unsorted sample)."""


class NumericalError(TrimLStatError, ArithmeticError):
    """A quadrature did not reach the requested tolerance."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class ConfigError(TrimLStatError, ValueError):
    """Experiment configuration is invalid or inconsistent."""
