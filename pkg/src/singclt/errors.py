"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: assumption violations exit with 2,
numerical failures with 3, anything else derived from ``DomainError`` with 1.
"""


class SingCLTError(Exception):
    """Base class for all library errors."""


class DomainError(SingCLTError, ValueError):
    """An argument lies outside the domain of an operation."""


class SingularityError(DomainError):
    """Evaluation requested at a singular frequency of the spectral density."""

    def __init__(self, message, component=None, frequency=None):
        super().__init__(message)
        self.component = component
        self.frequency = frequency


class DegenerateWeightError(DomainError):
    """A weight component has zero norm on the requested horizon."""


class UnsupportedLimitError(SingCLTError):
    """No closed-form limit measure is available for a weight family."""


class BudgetError(SingCLTError):
    """A combinatorial or computational budget would be exceeded."""


class AssumptionViolation(SingCLTError):
    """A standing assumption of the limit theorem does not hold."""


class OverlapError(AssumptionViolation):
    """A weight atom coincides with a singular frequency of the density."""


class NumericalError(SingCLTError, ArithmeticError):
    """A numerical routine failed to reach its tolerance."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class EmbeddingError(NumericalError):
    """Circulant embedding produced too much negative eigenvalue mass."""


class FactorizationError(NumericalError):
    """Cholesky factorization of a covariance matrix failed."""


class CoverageError(NumericalError):
    """A truncated frequency grid misses too much spectral mass."""


class ConsistencyError(NumericalError):
    """Two routes to the same quantity disagree beyond tolerance."""


class InconsistentMomentError(NumericalError):
    """A Parseval tail came out negative beyond quadrature tolerance."""


class IntegrabilityError(DomainError):
    """A transformation is not square integrable against the Gaussian."""


class ZeroFunctionError(DomainError):
    """Every Hermite coefficient of a transformation vanishes."""


class DegenerateSampleError(DomainError):
    """A sample has zero variance."""
