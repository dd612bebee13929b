"""Exception types shared across the package."""

from __future__ import annotations

__all__ = [
    "SchatpackError",
    "InvalidInputError",
    "DegenerateInputError",
    "UnsupportedOrderError",
    "InfeasibleAfterPreprocessingError",
    "ConvergenceFailureError",
]


class SchatpackError(Exception):
    """Base class for package errors."""


class InvalidInputError(SchatpackError, ValueError):
    """Input violates a documented precondition (shape, range, finiteness)."""


class DegenerateInputError(SchatpackError, ValueError):
    """Input is structurally valid but degenerate for the operation.

    Examples: the zero matrix for a dual witness, a zero weight vector for
    a normalized gradient.
    """


class UnsupportedOrderError(SchatpackError, ValueError):
    """The requested norm order p is outside the supported set."""


class InfeasibleAfterPreprocessingError(SchatpackError):
    """Preprocessing removed every column or matrix of the instance."""


class ConvergenceFailureError(SchatpackError):
    """An iterative routine hit its cap before stabilizing.

    The partial result is attached so callers can degrade gracefully.
    """

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial
