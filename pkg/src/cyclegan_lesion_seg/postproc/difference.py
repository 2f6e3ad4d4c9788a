"""Difference map between an infected slice and its synthetic healthy counterpart."""

from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from ..imgvol import SliceImage
from ..shared.errors import ShapeMismatchError


class DifferenceMap(BaseModel):
    """Non-negative residual inside the lung, zero outside."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    data: np.ndarray
    lung: np.ndarray

    @field_validator('data', mode='before')
    @classmethod
    def validate_data(cls, v) -> np.ndarray:
        arr = np.ascontiguousarray(v, dtype=np.float32)
        if arr.ndim != 2:
            raise ValueError(f"difference map must be 2-D, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)) or arr.min() < 0:
            raise ValueError("difference values must be finite and non-negative")
        return arr

    @field_validator('lung', mode='before')
    @classmethod
    def validate_lung(cls, v) -> np.ndarray:
        return np.ascontiguousarray(np.asarray(v).astype(bool), dtype=np.uint8)

    @model_validator(mode='after')
    def validate_support(self):
        if self.lung.shape != self.data.shape:
            raise ValueError(f"lung mask {self.lung.shape} does not match map {self.data.shape}")
        if np.any(self.data[self.lung == 0] != 0):
            raise ValueError("difference map must be zero outside the lung")
        return self

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    def lung_values(self) -> np.ndarray:
        """In-lung nonzero values, the samples the binarizers cluster."""
        return self.data[(self.lung == 1) & (self.data > 0)].astype(np.float64)


def subtract(
    infected: SliceImage, synthetic: SliceImage, lung: Optional[np.ndarray] = None
) -> DifferenceMap:
    """max(infected - synthetic, 0) inside ``lung`` (default: the infected slice's lung)."""
    lung = infected.lung if lung is None else np.asarray(lung)
    if infected.data.shape != synthetic.data.shape or lung.shape != infected.data.shape:
        raise ShapeMismatchError(
            f"subtract: infected {infected.data.shape}, synthetic {synthetic.data.shape}, "
            f"lung {lung.shape}"
        )
    residual = np.maximum(infected.data.astype(np.float64) - synthetic.data, 0.0)
    return DifferenceMap(data=np.where(lung.astype(bool), residual, 0.0), lung=lung)
