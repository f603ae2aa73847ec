"""Exception types shared across the package."""


class SarpostError(Exception):
    """Base class for all package errors."""


class InvalidDimensionError(SarpostError):
    """Array shapes inconsistent with the operator or declared sizes."""


class InvalidConfigurationError(SarpostError):
    """Configuration values out of their admissible range."""


class InvalidInputError(SarpostError):
    """Input data violates a documented precondition."""


class InvalidParameterError(SarpostError):
    """Scalar parameter outside its admissible range."""


class DegenerateSignalError(SarpostError):
    """Zero-energy signal where a finite SNR was requested."""


class DivergenceError(SarpostError):
    """Iterative scheme produced non-finite values."""

    def __init__(self, msg, outer=None, inner=None):
        super().__init__(msg)
        self.outer = outer
        self.inner = inner


class UndefinedMetricError(SarpostError):
    """Metric undefined for the given inputs (e.g. zero-energy reference)."""


class FileFormatError(SarpostError):
    """On-disk container has a bad magic, version, or layout."""


class WeightFormatError(SarpostError):
    """Weight container has a bad magic or an unknown version."""


class WeightManifestError(SarpostError):
    """Weight manifest inconsistent: missing tensors or shape mismatches."""


class WeightIOError(SarpostError):
    """Weight container truncated or unreadable."""
