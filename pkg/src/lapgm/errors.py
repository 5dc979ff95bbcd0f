"""Exception hierarchy, grouped by the exit code the CLI maps them to."""


class LapgmError(Exception):
    """Base class for all package-specific failures."""


class FormulaError(LapgmError, ValueError):
    """Malformed or unsupported model formula (CLI exit code 2)."""


class DataError(LapgmError, ValueError):
    """Problem with the input data table (CLI exit code 3)."""


class NumericalError(LapgmError, RuntimeError):
    """Numerical failure during fitting (CLI exit code 4)."""


class NotPositiveDefiniteError(NumericalError):
    """Cholesky pivot failure; ``pivot`` is the offending variable index."""

    def __init__(self, pivot, message=None):
        self.pivot = int(pivot)
        super().__init__(message or f"matrix is not positive definite (pivot at index {pivot})")


class ConvergenceError(NumericalError):
    """An iterative solver exhausted its iteration budget."""
