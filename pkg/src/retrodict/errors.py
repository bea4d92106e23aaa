"""Exception types raised across the package."""


class RetrodictError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class SchemaError(RetrodictError, ValueError):
    """An operator or POVM payload does not match its JSON schema."""

    exit_code = 3


class NonHermitianInput(RetrodictError, ValueError):
    """An operator that must be Hermitian is not.

    ``violation`` holds ``max|X - X^dag|`` so callers can judge how far off it is.
    """

    exit_code = 4

    def __init__(self, message, violation=float("nan")):
        super().__init__(message)
        self.violation = float(violation)


class DimensionMismatch(RetrodictError, ValueError):
    exit_code = 5


class ImpossiblePostselection(RetrodictError, ArithmeticError):
    """The postselected effect cannot be reached from the prepared state."""

    exit_code = 6


class TruncationTooSevere(RetrodictError, ValueError):
    exit_code = 7


class SingularDenominator(RetrodictError, ArithmeticError):
    exit_code = 8


class InvalidPovm(RetrodictError, ValueError):
    exit_code = 9
