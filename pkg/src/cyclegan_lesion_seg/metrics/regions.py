"""Lung subdivision into equal boxes and per-region lesion diagnosis."""

import logging
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from ..imgvol import BinaryMask
from ..shared.errors import DegenerateVolumeError, GridMismatchError
from ..shared.schemas import MetricsConfig, RegionDiagnosis
from .overlap import MaskLike, bool_pair

logger = logging.getLogger(__name__)


def divide_regions(
    lung: Union[BinaryMask, np.ndarray], axes: Tuple[int, int, int] = (3, 2, 2)
) -> np.ndarray:
    """Label each lung voxel with its box of the lung bounding box, 1..prod(axes); others 0.

    ``axes`` gives the band counts along (sup-inf, ant-post, left-right), that
    is array axes (z, y, x). A voxel at index c in a box spanning [lo, hi]
    falls in band floor((c - lo) * n / (hi - lo + 1)).
    """
    data = lung.data if isinstance(lung, BinaryMask) else np.asarray(lung)
    if data.ndim != 3:
        raise DegenerateVolumeError(f"region division needs a 3-D lung mask, got {data.shape}")
    inside = data.astype(bool)
    if not inside.any():
        raise DegenerateVolumeError("cannot divide an empty lung mask into regions")

    idx = np.nonzero(inside)
    bands = []
    for coords, n in zip(idx, axes):
        lo, hi = int(coords.min()), int(coords.max())
        bands.append(((coords - lo) * n) // (hi - lo + 1))
    nz, ny, nx = axes
    labels = np.zeros(data.shape, dtype=np.int32)
    labels[idx] = 1 + bands[0] * (ny * nx) + bands[1] * nx + bands[2]
    return labels


def region_presence(
    mask: np.ndarray, regions: np.ndarray, n_regions: int, min_voxels: int = 1
) -> List[bool]:
    """Per region 1..n_regions: does it hold at least ``min_voxels`` mask voxels?"""
    counts = np.bincount(regions[mask.astype(bool)], minlength=n_regions + 1)
    return [bool(c >= min_voxels) for c in counts[1:n_regions + 1]]


def _ratio(num: int, den: int, nothing_anywhere: bool, name: str, flags: List[str]) -> float:
    if den > 0:
        return num / den
    value = 1.0 if nothing_anywhere else 0.0
    flags.append(f"{name} undefined, set to {value}")
    return value


def diagnosis_from_presence(predicted: Sequence[bool], truth: Sequence[bool]) -> RegionDiagnosis:
    """Confusion counts and ratios of per-region presence calls."""
    p = np.asarray(predicted, dtype=bool)
    t = np.asarray(truth, dtype=bool)
    if p.shape != t.shape:
        raise GridMismatchError(f"{p.size} predicted regions vs {t.size} true regions")
    tp = int((p & t).sum())
    fp = int((p & ~t).sum())
    fn = int((~p & t).sum())
    tn = int((~p & ~t).sum())
    flags: List[str] = []
    return RegionDiagnosis(
        predicted=p.tolist(),
        truth=t.tolist(),
        tp=tp,
        fp=fp,
        fn=fn,
        tn=tn,
        accuracy=(tp + tn) / p.size if p.size else 1.0,
        precision=_ratio(tp, tp + fp, fn == 0, "precision", flags),
        sensitivity=_ratio(tp, tp + fn, fp == 0, "sensitivity", flags),
        flags=flags,
    )


def region_diagnosis(
    pred: MaskLike,
    gt: MaskLike,
    lung: Union[BinaryMask, np.ndarray],
    cfg: Optional[MetricsConfig] = None,
) -> RegionDiagnosis:
    """Region is positive when it holds at least ``min_voxels`` lesion voxels."""
    cfg = cfg or MetricsConfig()
    p, g = bool_pair(pred, gt)
    regions = divide_regions(lung, cfg.region_axes)
    if regions.shape != p.shape:
        raise GridMismatchError(f"lung grid {regions.shape} does not match masks {p.shape}")
    n = int(np.prod(cfg.region_axes))
    return diagnosis_from_presence(
        region_presence(p, regions, n, cfg.min_voxels),
        region_presence(g, regions, n, cfg.min_voxels),
    )


def aggregate_diagnoses(diagnoses: Sequence[RegionDiagnosis]) -> RegionDiagnosis:
    """Cohort totals: ratios from the summed confusion counts over every patient's regions."""
    if not diagnoses:
        raise ValueError("no region diagnoses to aggregate")
    predicted = [b for d in diagnoses for b in d.predicted]
    truth = [b for d in diagnoses for b in d.truth]
    total = diagnosis_from_presence(predicted, truth)
    logger.debug(
        f"Region totals over {len(diagnoses)} cases: TP={total.tp} FP={total.fp} "
        f"FN={total.fn} TN={total.tn}"
    )
    return total
