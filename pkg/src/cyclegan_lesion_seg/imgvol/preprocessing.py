"""CT preprocessing: isotropic resampling, HU windowing, masking and slice extraction."""

import logging
from typing import List, Sequence, Tuple

import numpy as np
from scipy import ndimage

from ..shared.errors import BoundingBoxOverflowError, DegenerateVolumeError, ShapeMismatchError
from ..shared.schemas import SliceLabel
from .volume import BinaryMask, CtVolume, SliceImage, require_same_grid

logger = logging.getLogger(__name__)


def _resampled_grid(
    shape: Tuple[int, int, int], spacing: Sequence[float], target: float
) -> Tuple[Tuple[int, int, int], List[np.ndarray]]:
    """Output shape and per-axis continuous sample indices, in array (z, y, x) order."""
    out_shape = []
    coords = []
    # spacing is (sx, sy, sz); array axes are (z, y, x)
    for n, sp in zip(shape, reversed(tuple(spacing))):
        n_out = max(1, int(round(n * sp / target)))
        if sp == target and n_out == n:
            c = np.arange(n, dtype=np.float64)
        else:
            if n < 2:
                raise DegenerateVolumeError(
                    f"axis with {n} voxel(s) at spacing {sp} cannot be interpolated to {target} mm"
                )
            c = (np.arange(n_out, dtype=np.float64) + 0.5) * (target / sp) - 0.5
            c = np.clip(c, 0.0, n - 1)
        out_shape.append(n_out)
        coords.append(c)
    return tuple(out_shape), coords


def _shifted_origin(vol, target: float) -> Tuple[float, float, float]:
    """Keep the physical start edge of the grid in place."""
    return tuple(
        float(o - sp / 2.0 + target / 2.0) for o, sp in zip(vol.origin, vol.spacing)
    )


def _sample(data: np.ndarray, coords: List[np.ndarray], order: int) -> np.ndarray:
    """Evaluate the interpolant on the outer product of per-axis coordinates, plane by plane."""
    cz, cy, cx = coords
    yy, xx = np.meshgrid(cy, cx, indexing='ij')
    out = np.empty((cz.size, cy.size, cx.size), dtype=np.float64)
    for k, z in enumerate(cz):
        zz = np.full_like(yy, z)
        out[k] = ndimage.map_coordinates(
            data, [zz, yy, xx], order=order, mode='nearest', prefilter=False
        )
    return out


def resample_isotropic(vol: CtVolume, target: float = 1.0) -> CtVolume:
    """Trilinear resampling to (target, target, target) mm spacing."""
    if target <= 0:
        raise ValueError(f"target spacing must be positive, got {target}")
    if all(sp == target for sp in vol.spacing):
        return CtVolume(data=vol.data.copy(), spacing=vol.spacing, origin=vol.origin)

    out_shape, coords = _resampled_grid(vol.data.shape, vol.spacing, target)
    src = vol.data.astype(np.float64)
    out = _sample(src, coords, order=1)
    out = np.clip(out, src.min(), src.max())
    logger.debug(f"Resampled volume {vol.dims} @ {vol.spacing} mm -> {tuple(reversed(out_shape))}")
    return CtVolume(
        data=out.astype(np.float32),
        spacing=(target, target, target),
        origin=_shifted_origin(vol, target),
    )


def resample_mask_isotropic(mask: BinaryMask, target: float = 1.0) -> BinaryMask:
    """Nearest-neighbour counterpart of resample_isotropic for {0,1} masks."""
    if target <= 0:
        raise ValueError(f"target spacing must be positive, got {target}")
    if mask.data.ndim != 3:
        raise ShapeMismatchError(f"only 3-D masks can be resampled, got shape {mask.shape}")
    if all(sp == target for sp in mask.spacing):
        return BinaryMask(data=mask.data.copy(), spacing=mask.spacing, origin=mask.origin)

    _, coords = _resampled_grid(mask.data.shape, mask.spacing, target)
    out = _sample(mask.data.astype(np.float64), coords, order=0)
    return BinaryMask(
        data=(out >= 0.5).astype(np.uint8),
        spacing=(target, target, target),
        origin=_shifted_origin(mask, target),
    )


def window_normalize(vol: CtVolume, lo: float = -800.0, hi: float = 100.0) -> CtVolume:
    """Map HU to [-1, 1]: v -> clamp(2(v - lo)/(hi - lo) - 1, -1, 1)."""
    if lo >= hi:
        raise ValueError(f"window lower bound {lo} must be below upper bound {hi}")
    v = vol.data.astype(np.float64)
    norm = np.clip(2.0 * (v - lo) / (hi - lo) - 1.0, -1.0, 1.0)
    return CtVolume(data=norm.astype(np.float32), spacing=vol.spacing, origin=vol.origin)


def apply_mask_zero_background(norm: CtVolume, mask: BinaryMask) -> CtVolume:
    """Zero every voxel outside the mask; keep the others unchanged."""
    require_same_grid(norm, mask)
    data = np.where(mask.data == 1, norm.data, np.float32(0.0)).astype(np.float32)
    return CtVolume(data=data, spacing=norm.spacing, origin=norm.origin)


def lung_bbox(mask: np.ndarray) -> Tuple[Tuple[int, int], ...]:
    """Inclusive (min, max) index per array axis of the nonzero region."""
    idx = np.nonzero(mask)
    return tuple((int(a.min()), int(a.max())) for a in idx)


def crop_start(lo: int, hi: int, side: int) -> int:
    """Top-left index of a side-long window centered on the inclusive span [lo, hi]."""
    return (lo + hi + 1) // 2 - side // 2


def _crop_2d(img: np.ndarray, y0: int, x0: int, side: int) -> np.ndarray:
    """side x side window starting at (y0, x0); pixels outside the image are 0."""
    out = np.zeros((side, side), dtype=img.dtype)
    h, w = img.shape
    sy0, sy1 = max(y0, 0), min(y0 + side, h)
    sx0, sx1 = max(x0, 0), min(x0 + side, w)
    if sy0 < sy1 and sx0 < sx1:
        out[sy0 - y0:sy1 - y0, sx0 - x0:sx1 - x0] = img[sy0:sy1, sx0:sx1]
    return out


def extract_slices(
    norm: CtVolume,
    mask: BinaryMask,
    side: int = 256,
    volume_id: str = "volume",
    label: SliceLabel = "unknown",
) -> List[SliceImage]:
    """Axial slices intersecting the lung, cropped to side x side around the lung bounding box."""
    require_same_grid(norm, mask)
    if side < 1:
        raise ValueError(f"crop side must be positive, got {side}")
    if mask.count == 0:
        logger.info(f"Volume {volume_id}: empty lung mask, no slices extracted")
        return []

    (z_lo, z_hi), (y_lo, y_hi), (x_lo, x_hi) = lung_bbox(mask.data)
    bbox_h, bbox_w = y_hi - y_lo + 1, x_hi - x_lo + 1
    if bbox_h > side or bbox_w > side:
        raise BoundingBoxOverflowError(
            f"Volume {volume_id}: lung bounding box {bbox_h}x{bbox_w} exceeds crop side {side}"
        )
    y0 = crop_start(y_lo, y_hi, side)
    x0 = crop_start(x_lo, x_hi, side)

    slices = []
    for z in range(z_lo, z_hi + 1):
        lung = mask.data[z]
        if not lung.any():
            continue
        lung_crop = _crop_2d(lung, y0, x0, side)
        img = np.where(lung_crop == 1, _crop_2d(norm.data[z], y0, x0, side), np.float32(0.0))
        slices.append(
            SliceImage(
                data=np.clip(img, -1.0, 1.0),
                lung=lung_crop,
                label=label,
                volume_id=volume_id,
                slice_index=z,
                crop_origin=(y0, x0),
            )
        )
    logger.debug(f"Volume {volume_id}: {len(slices)} slices, crop origin (y={y0}, x={x0})")
    return slices


def paste_slice(
    values: np.ndarray, crop_origin: Tuple[int, int], grid_shape: Tuple[int, int]
) -> np.ndarray:
    """Place a cropped 2-D result back into a (ny, nx) plane; parts outside the plane are dropped."""
    y0, x0 = crop_origin
    h, w = values.shape
    ny, nx = grid_shape
    out = np.zeros((ny, nx), dtype=values.dtype)
    ty0, ty1 = max(y0, 0), min(y0 + h, ny)
    tx0, tx1 = max(x0, 0), min(x0 + w, nx)
    if ty0 < ty1 and tx0 < tx1:
        out[ty0:ty1, tx0:tx1] = values[ty0 - y0:ty1 - y0, tx0 - x0:tx1 - x0]
    return out


def preprocess_volume(
    vol: CtVolume,
    lung: BinaryMask,
    lo: float = -800.0,
    hi: float = 100.0,
    side: int = 256,
    target_spacing: float = 1.0,
    volume_id: str = "volume",
    label: SliceLabel = "unknown",
) -> List[SliceImage]:
    """resample -> window_normalize -> mask -> extract_slices."""
    require_same_grid(vol, lung)
    vol_r = resample_isotropic(vol, target_spacing)
    lung_r = resample_mask_isotropic(lung, target_spacing)
    norm = apply_mask_zero_background(window_normalize(vol_r, lo, hi), lung_r)
    return extract_slices(norm, lung_r, side=side, volume_id=volume_id, label=label)
