"""Volume, mask and slice data model.

Arrays are stored axial-slice first: a volume of dims (nx, ny, nz) holds a
numpy array of shape (nz, ny, nx).
"""

from typing import Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..shared.errors import GridMismatchError
from ..shared.schemas import SliceLabel

Vec3 = Tuple[float, float, float]


class _Grid(BaseModel):
    """Common grid metadata of volumes and masks."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    data: np.ndarray
    spacing: Vec3 = Field(default=(1.0, 1.0, 1.0), description="mm per voxel along (x, y, z)")
    origin: Vec3 = Field(default=(0.0, 0.0, 0.0), description="mm position of the first voxel center")

    @field_validator('spacing')
    @classmethod
    def validate_spacing(cls, v: Vec3) -> Vec3:
        if any(not np.isfinite(s) or s <= 0 for s in v):
            raise ValueError(f"spacing must be positive and finite, got {v}")
        return v

    @property
    def dims(self) -> Tuple[int, ...]:
        """Voxel counts as (nx, ny, nz)."""
        return tuple(int(n) for n in reversed(self.data.shape))

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    def same_grid(self, other: "_Grid") -> bool:
        return (
            self.data.shape == other.data.shape
            and tuple(self.spacing) == tuple(other.spacing)
            and tuple(self.origin) == tuple(other.origin)
        )


class CtVolume(_Grid):
    """3-D scalar field in Hounsfield units (or normalized intensity after windowing)."""

    @field_validator('data', mode='before')
    @classmethod
    def validate_data(cls, v) -> np.ndarray:
        arr = np.ascontiguousarray(v, dtype=np.float32)
        if arr.ndim != 3 or arr.size == 0:
            raise ValueError(f"volume data must be a non-empty 3-D array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("volume data contains NaN or Inf")
        return arr


class BinaryMask(_Grid):
    """{0,1} field on the grid of its volume (3-D) or of a single slice (2-D)."""

    @field_validator('data', mode='before')
    @classmethod
    def validate_data(cls, v) -> np.ndarray:
        arr = np.asarray(v)
        if arr.ndim not in (2, 3) or arr.size == 0:
            raise ValueError(f"mask data must be a non-empty 2-D or 3-D array, got shape {arr.shape}")
        if arr.dtype == bool:
            return np.ascontiguousarray(arr, dtype=np.uint8)
        if not np.all((arr == 0) | (arr == 1)):
            raise ValueError("mask values must be exactly 0 or 1")
        return np.ascontiguousarray(arr, dtype=np.uint8)

    @property
    def count(self) -> int:
        return int(self.data.sum(dtype=np.int64))

    def as_bool(self) -> np.ndarray:
        return self.data.astype(bool)


class SliceImage(BaseModel):
    """Normalized axial slice in [-1, 1] with zero background outside the lung."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    data: np.ndarray
    lung: np.ndarray
    label: SliceLabel = "unknown"
    volume_id: str = "volume"
    slice_index: int = Field(default=0, ge=0)
    crop_origin: Tuple[int, int] = Field(
        default=(0, 0), description="(y, x) of the crop's top-left pixel in the volume grid"
    )

    @field_validator('data', mode='before')
    @classmethod
    def validate_data(cls, v) -> np.ndarray:
        arr = np.ascontiguousarray(v, dtype=np.float32)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError(f"slice data must be a non-empty 2-D array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)) or arr.min() < -1.0 or arr.max() > 1.0:
            raise ValueError("slice values must be finite and lie in [-1, 1]")
        return arr

    @field_validator('lung', mode='before')
    @classmethod
    def validate_lung(cls, v) -> np.ndarray:
        arr = np.asarray(v)
        if arr.dtype != bool and not np.all((arr == 0) | (arr == 1)):
            raise ValueError("lung mask values must be exactly 0 or 1")
        return np.ascontiguousarray(arr, dtype=np.uint8)

    @model_validator(mode='after')
    def validate_background(self):
        """Lung mask matches the image and the background is exactly zero."""
        if self.lung.shape != self.data.shape:
            raise ValueError(f"lung mask {self.lung.shape} does not match slice {self.data.shape}")
        if np.any(self.data[self.lung == 0] != 0):
            raise ValueError("slice pixels outside the lung must be exactly 0")
        return self

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def width(self) -> int:
        return int(self.data.shape[1])


def require_same_grid(a: Union[CtVolume, BinaryMask], b: Union[CtVolume, BinaryMask]) -> None:
    """Raise GridMismatchError unless both fields share shape, spacing and origin."""
    if not a.same_grid(b):
        raise GridMismatchError(
            f"grids differ: shape {a.shape} vs {b.shape}, spacing {a.spacing} vs {b.spacing}, "
            f"origin {a.origin} vs {b.origin}"
        )
