"""Exception hierarchy.

The CLI maps these onto exit codes: validation problems exit 1, failed
mathematical checks exit 2, numerical failures exit 3.
"""


class DegparabError(Exception):
    """Base class for all package errors."""


class ValidationError(DegparabError, ValueError):
    """Invalid input or configuration."""


class DomainError(ValidationError):
    """Argument outside the domain of the operation."""


class InvalidFunctionError(ValidationError):
    """A tabulated singularity function with unusable samples."""


class CheckFailed(DegparabError):
    """A mathematical precondition does not hold for the given data."""


class EllipticityRefusal(CheckFailed):
    """Raised by ``transform`` when the coefficient field is not R-degenerate
    uniformly strongly elliptic; the transformed problem would not be
    uniformly parabolic."""

    def __init__(self, message, worst_point=None, alpha_lower=None):
        super().__init__(message)
        self.worst_point = worst_point
        self.alpha_lower = alpha_lower


class NumericalError(DegparabError):
    """A numerical procedure failed (linear solve, quadrature, ...)."""


class SolverError(NumericalError):
    pass


class UndefinedQuotientError(ValidationError):
    """Maximal-regularity quotient requested for a zero forcing."""
