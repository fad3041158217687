"""Exception hierarchy.

ValidationError marks bad inputs or violated declared hypotheses (CLI exit
code 2).  NumericalError marks failures of the numerics themselves (CLI
exit code 3).
"""


class ValidationError(ValueError):
    """Input data or declared exponents violate a precondition."""


class AdditivityViolation(ValidationError):
    """Parent value does not match the sum of its children."""

    def __init__(self, message, cube=None, residual=None):
        super().__init__(message)
        self.cube = cube
        self.residual = residual


class AlmostAdditivityViolation(ValidationError):
    """Germ residual exceeds the declared C |K|^(1+eps) bound."""

    def __init__(self, message, cube=None, residual=None, bound=None):
        super().__init__(message)
        self.cube = cube
        self.residual = residual
        self.bound = bound


class YoungConditionViolated(ValidationError):
    """Declared Hoelder plus fractionality exponents do not exceed 1."""


class NumericalError(RuntimeError):
    """A numerical procedure failed or hit a hard budget."""


class DepthExceeded(NumericalError):
    """Bisection passed the maximum depth (gauge shrinks too fast)."""


class NonFiniteSample(NumericalError):
    """The integrand returned a non-finite value at an interior tag."""


class FactorizationFailure(NumericalError):
    """Covariance factorization failed even after the ridge retry."""
