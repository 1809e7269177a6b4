"""
Exception types shared by the mHDSC pipeline.

ValidationError subclasses ValueError and NumericalError subclasses RuntimeError,
so callers that only know the builtin types keep working.
"""
from typing import Optional


class MHDSCError(Exception):
    """Base class for every error raised by the pipeline."""


class ValidationError(MHDSCError, ValueError):
    """Invalid parameters or input data."""


class DatasetFormatError(ValidationError):
    """Malformed dataset or matrix file, with a 1-based location."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where = f" ({where})"
        super().__init__(f"{message}{where}")


class ModelFormatError(ValidationError):
    """Corrupted or truncated model file."""


class UnsupportedVersionError(ModelFormatError):
    """Model file written by a newer format version."""


class NumericalError(MHDSCError, RuntimeError):
    """Numerical failure inside a solver."""


class DivergenceError(NumericalError):
    """An iterate became non-finite."""


class ConvergenceError(NumericalError):
    """An iterative method hit its cap without converging."""

    def __init__(self, message: str, last_estimate: Optional[float] = None):
        self.last_estimate = last_estimate
        super().__init__(message)


class InvariantError(NumericalError):
    """A mathematical invariant (monotone objective, PSD) was breached."""
