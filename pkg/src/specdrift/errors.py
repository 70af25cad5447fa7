"""Exception hierarchy shared by every module."""


class SpecDriftError(Exception):
    """Base class for all library errors."""


class DimensionError(SpecDriftError, ValueError):
    """Operand shapes are incompatible with the requested operation."""


class ConfigurationError(SpecDriftError, ValueError):
    """A configuration value violates its documented constraints."""


class ValidationError(SpecDriftError, ValueError):
    """User-supplied data (splits, labels, files) failed validation."""


class FormatError(SpecDriftError, ValueError):
    """A binary file is malformed.

    ``offset`` is the byte position at which reading failed.
    """

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class NumericError(SpecDriftError, ArithmeticError):
    """A computation produced NaN or Inf."""


class DegenerateBinError(NumericError):
    """An alignment target was requested for a zero Fourier coefficient."""
