"""Exception types raised across the toolkit."""


class MpsegError(Exception):
    """Base class for all toolkit errors."""


class ShapeMismatch(MpsegError):
    """Volumes that must share a grid have different shapes or spacing."""


class GridMismatch(ShapeMismatch):
    """Masks compared by a metric do not live on the same grid."""


class MissingB0(MpsegError):
    """Two-point ADC fit requires the first b-value to be 0."""


class DegenerateDesign(MpsegError):
    """Least-squares ADC fit with all b-values equal (zero denominator)."""


class UnknownMode(MpsegError):
    """Unsupported interpolation mode."""


class NonPositiveSpacing(MpsegError):
    """Voxel spacing must be > 0 on every axis."""


class SizeMismatch(MpsegError):
    """Requested split sizes do not sum to the number of cases."""


class MissingChannel(MpsegError):
    """A case is missing one of its required channel files."""


class CorruptFile(MpsegError):
    """A volume file could not be parsed."""


class EmptyMask(MpsegError):
    """Operation undefined on an empty mask."""


class EmptyGroundTruth(EmptyMask):
    """Relative volume difference undefined for empty ground truth."""


class InvalidVariant(MpsegError):
    """Unknown model variant name."""


class ChannelMismatch(MpsegError):
    """Input channel count does not match the model variant."""


class IndivisibleShape(MpsegError):
    """Spatial dims must be divisible by the model's total stride."""


class InvalidAlphaBeta(MpsegError):
    """Tversky alpha/beta must be >= 0."""


class Divergence(MpsegError):
    """Training loss became non-finite."""

    def __init__(self, iteration: int, message: str | None = None):
        self.iteration = iteration
        super().__init__(message or f"non-finite loss at iteration {iteration}")


class InvalidOverlap(MpsegError):
    """Sliding-window overlap must lie in [0, 1)."""


class UnknownChannel(MpsegError):
    """Channel name not in {T2W, B1000, ADC}."""


class TumorOutOfBounds(MpsegError):
    """Configured phantom tumor does not fit inside the volume."""


class ConfigInvalid(MpsegError):
    """Experiment or phantom config failed schema validation."""


class MissingInput(MpsegError):
    """A required input path does not exist."""
