"""Exception hierarchy shared across the package."""


class StatsegError(Exception):
    """Base class for all package-specific errors."""


class EmptyMaskError(StatsegError):
    """A mask with no foreground pixels where foreground is required."""


class ShapeMismatchError(StatsegError):
    """Two grids that must share a shape do not."""


class NonBinaryWeakMaskError(StatsegError):
    """Weak mask contains values other than 0 and 1."""


class InvalidConfigError(StatsegError):
    """Configuration object violates its invariants."""


class InfeasibleROIError(StatsegError):
    """No ellipse satisfying the ROI-fraction constraint fits the grid."""


class EmptyStackError(StatsegError):
    """A mask stack with no slices."""


class AllSlicesEmptyError(StatsegError):
    """Every slice in a volume has zero foreground."""


class MissingPairError(StatsegError):
    """An image file without its mask counterpart (or vice versa)."""


class MalformedFileError(StatsegError):
    """A file that cannot be parsed as the expected format."""


class NonFiniteGradientError(StatsegError):
    """Gradient contains NaN or infinity."""


class NonFiniteLossError(StatsegError):
    """Loss value is NaN or infinite; training aborts."""


class ConfigFileError(StatsegError):
    """A run-config JSON file is malformed or references missing paths."""
