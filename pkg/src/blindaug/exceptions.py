"""Exception types raised by blindaug."""

from sklearn.exceptions import NotFittedError  # noqa: F401  re-exported


class InvalidInputError(ValueError):
    """Raised when an argument violates a precondition (shape, range, sign)."""


class DegenerateFitError(RuntimeError):
    """Raised when a model cannot be fitted because the data under-determine it."""


class FileFormatError(ValueError):
    """Raised when a file on disk is not in the expected format."""
