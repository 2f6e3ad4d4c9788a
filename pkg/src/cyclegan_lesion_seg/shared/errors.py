"""Exception hierarchy shared by every stage of the pipeline."""

from typing import Optional


class LesionSegError(Exception):
    """Base class for all toolkit errors."""


class ConfigValidationError(LesionSegError, ValueError):
    """Configuration violates a module precondition."""


class GridMismatchError(LesionSegError, ValueError):
    """Two fields that must share a voxel grid do not."""


class ShapeMismatchError(LesionSegError, ValueError):
    """Array or tensor shapes are incompatible for an operation."""


class DegenerateVolumeError(LesionSegError, ValueError):
    """Volume is too small along an axis that needs interpolation."""


class BoundingBoxOverflowError(LesionSegError, ValueError):
    """Lung bounding box does not fit in the requested crop."""


class MalformedHeaderError(LesionSegError, ValueError):
    """Volume/mask/parameter header cannot be parsed or validated."""


class PayloadSizeError(LesionSegError, ValueError):
    """Raw payload size disagrees with its header."""


class EmptyPoolError(LesionSegError, ValueError):
    """A training pool has no images."""


class GraphError(LesionSegError, RuntimeError):
    """Invalid use of the differentiation tape."""


class NonFiniteError(LesionSegError, ArithmeticError):
    """A loss or gradient became NaN/Inf."""

    def __init__(self, message: str, last_checkpoint: Optional[str] = None):
        if last_checkpoint:
            message = f"{message} (last good checkpoint: {last_checkpoint})"
        super().__init__(message)
        self.last_checkpoint = last_checkpoint
