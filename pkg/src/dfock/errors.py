"""Exception hierarchy shared by all dfock modules."""


class DfockError(Exception):
    """Base class for numerical and domain errors raised by the library."""


class OutOfDomainError(DfockError, ValueError):
    """A point or radius lies outside the region where an object is defined."""


class SubharmonicityError(DfockError):
    """A weight produced a negative Laplacian density."""


class ConvergenceError(DfockError):
    """Quadrature or iteration did not reach its tolerance.

    The best available estimate is kept on ``best_estimate`` so callers can
    decide whether it is usable.
    """

    def __init__(self, message, best_estimate=None, error_estimate=None):
        super().__init__(message)
        self.best_estimate = best_estimate
        self.error_estimate = error_estimate


class DivergenceError(ConvergenceError):
    """An integrand failed to decay inside the admissible domain."""


class UnresolvableRadiusError(DfockError):
    """The induced radius could not be bracketed."""


class TruncationBudgetError(DfockError):
    """A kernel series needed more terms than ``max_degree`` provides."""

    def __init__(self, message, partial_sum=None):
        super().__init__(message)
        self.partial_sum = partial_sum


class InsufficientDataError(DfockError):
    """Too few samples to fit or classify."""


class EstimateViolationError(DfockError):
    """A fitted envelope that a theorem guarantees could not be found."""


class DivisionDomainError(DfockError, ZeroDivisionError):
    """A reciprocal was requested where the denominator is (numerically) zero."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class NumericalError(DfockError):
    """Linear algebra failure (e.g. SVD non-convergence)."""


class ConfigError(DfockError):
    """Invalid run configuration (CLI exit code 2)."""
