"""Exception hierarchy.

Two families: ``ValidationError`` for malformed inputs/configs (CLI exit
code 1) and ``NumericDomainError`` for mathematically out-of-range requests
(CLI exit code 2).
"""


class ScovError(Exception):
    pass


class ValidationError(ScovError, ValueError):
    pass


class NumericDomainError(ScovError, ArithmeticError):
    pass


class NonOrthonormalBasisError(ValidationError):
    pass


class BadRanksError(ValidationError):
    pass


class BadSparsityError(ValidationError):
    pass


class BadNoiseError(ValidationError):
    pass


class DimensionMismatchError(ValidationError):
    pass


class BadIndexSetError(ValidationError):
    pass


class IndexOutOfRangeError(ValidationError):
    pass


class DuplicateMultiIndexError(ValidationError):
    pass


class NotApplicableError(ValidationError):
    pass


class NegativeCoefficientError(ValidationError):
    pass


class UnsupportedOrderError(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class IndefiniteArgumentError(NumericDomainError):
    """The matrix inside the determinant kernel is not positive definite."""


class SingularCovarianceError(NumericDomainError):
    pass


class DomainViolationError(NumericDomainError):
    """A closed-form kernel factor has a nonpositive base."""


class DivergentSeriesError(NumericDomainError):
    pass
