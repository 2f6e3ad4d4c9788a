"""Subtraction post-processing chain and its per-volume assembly."""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..imgvol import BinaryMask, SliceImage, paste_slice
from ..shared.errors import ShapeMismatchError
from ..shared.schemas import BinarizeMethod, PostprocConfig
from .binarize import Binarization, kmeans_binarize, otsu_binarize
from .difference import DifferenceMap, subtract
from .filters import dilate, erode, fill_holes, gaussian_smooth_mask, median_filter

logger = logging.getLogger(__name__)


@dataclass
class SliceSegmentation:
    mask: np.ndarray
    method: BinarizeMethod
    threshold: Optional[float] = None
    flags: List[str] = field(default_factory=list)


def binarize(diff: DifferenceMap, method: BinarizeMethod, cfg: PostprocConfig) -> Binarization:
    if method == "kmeans":
        return kmeans_binarize(diff, k=cfg.k, restarts=cfg.restarts, seed=cfg.seed, max_iter=cfg.max_iter)
    if method == "otsu":
        return otsu_binarize(diff)
    raise ValueError(f"unknown binarization method {method!r}")


def postprocess_pipeline(
    infected: SliceImage,
    synthetic: SliceImage,
    lung: Optional[np.ndarray] = None,
    method: Optional[BinarizeMethod] = None,
    cfg: Optional[PostprocConfig] = None,
) -> SliceSegmentation:
    """subtract -> median -> binarize -> gaussian -> fill holes -> erode -> dilate.

    Filtered differences below ``cfg.min_difference`` never count as lesion,
    whatever threshold the binarizer picked.

    Every stage output is intersected with the lung so the final mask never
    leaves it.
    """
    cfg = cfg or PostprocConfig()
    method = method or cfg.method
    lung = (infected.lung if lung is None else np.asarray(lung)).astype(bool)

    diff = subtract(infected, synthetic, lung)
    filtered = np.where(lung, median_filter(diff.data, cfg.median_window), np.float32(0.0))
    result = binarize(DifferenceMap(data=filtered, lung=lung), method, cfg)

    # lesion = filtered >= max(cluster threshold, min_difference)
    mask = result.mask.astype(bool) & lung & (filtered >= cfg.min_difference)
    threshold = result.threshold
    if threshold is not None and threshold < cfg.min_difference:
        logger.debug(f"{method} threshold {threshold:.4f} raised to {cfg.min_difference}")
        threshold = cfg.min_difference
    for stage in (
        lambda m: gaussian_smooth_mask(m, cfg.gaussian_size, cfg.gaussian_sigma, cfg.smooth_threshold),
        fill_holes,
        erode,
        dilate,
    ):
        mask = stage(mask).astype(bool) & lung
    return SliceSegmentation(
        mask=mask.astype(np.uint8), method=method, threshold=threshold, flags=list(result.flags)
    )


def segment_volume(
    infected: Sequence[SliceImage],
    synthetic: Sequence[SliceImage],
    lung: BinaryMask,
    method: Optional[BinarizeMethod] = None,
    cfg: Optional[PostprocConfig] = None,
) -> Tuple[BinaryMask, List[str]]:
    """Run the chain on every (infected, synthetic) slice pair and stack into the lung's grid.

    Slices not given stay empty. Returns the 3-D mask and the flags raised,
    each prefixed with its slice index.
    """
    if len(infected) != len(synthetic):
        raise ShapeMismatchError(
            f"segment_volume: {len(infected)} infected vs {len(synthetic)} synthetic slices"
        )
    if lung.data.ndim != 3:
        raise ShapeMismatchError(f"segment_volume needs a 3-D lung mask, got {lung.data.shape}")
    nz, ny, nx = lung.data.shape
    out = np.zeros((nz, ny, nx), dtype=np.uint8)
    flags: List[str] = []
    for inf, syn in zip(infected, synthetic):
        if not 0 <= inf.slice_index < nz:
            raise ShapeMismatchError(f"slice index {inf.slice_index} outside volume depth {nz}")
        seg = postprocess_pipeline(inf, syn, method=method, cfg=cfg)
        out[inf.slice_index] |= paste_slice(seg.mask, inf.crop_origin, (ny, nx))
        flags.extend(f"slice {inf.slice_index}: {f}" for f in seg.flags)
    out &= lung.data
    logger.info(f"Segmented {len(infected)} slices: {int(out.sum())} lesion voxels")
    return BinaryMask(data=out, spacing=lung.spacing, origin=lung.origin), flags
