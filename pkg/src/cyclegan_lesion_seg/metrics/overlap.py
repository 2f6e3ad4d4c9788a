"""Volumetric overlap of predicted and ground-truth lesion masks."""

from typing import Tuple, Union

import numpy as np

from ..imgvol import BinaryMask, require_same_grid
from ..shared.errors import GridMismatchError
from ..shared.schemas import OverlapReport

MaskLike = Union[BinaryMask, np.ndarray]

BOTH_EMPTY = "both masks empty: all metrics set to 100"
PRED_EMPTY = "prediction empty: PSC undefined, set to 0"
TRUTH_EMPTY = "ground truth empty: SEN undefined, set to 0"


def bool_pair(pred: MaskLike, gt: MaskLike) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(pred, BinaryMask) and isinstance(gt, BinaryMask):
        require_same_grid(pred, gt)
    p = pred.data if isinstance(pred, BinaryMask) else np.asarray(pred)
    g = gt.data if isinstance(gt, BinaryMask) else np.asarray(gt)
    if p.shape != g.shape:
        raise GridMismatchError(f"mask shapes differ: {p.shape} vs {g.shape}")
    return p.astype(bool), g.astype(bool)


def overlap_counts(pred: MaskLike, gt: MaskLike) -> Tuple[int, int, int]:
    """(|pred|, |gt|, |pred & gt|) as integers."""
    p, g = bool_pair(pred, gt)
    return int(p.sum()), int(g.sum()), int((p & g).sum())


def overlap_report(pred: MaskLike, gt: MaskLike) -> OverlapReport:
    """DSC = 2|P&G| / (|P|+|G|), PSC = |P&G| / |P|, SEN = |P&G| / |G|, in percent."""
    n_pred, n_gt, n_overlap = overlap_counts(pred, gt)
    if n_pred == 0 and n_gt == 0:
        return OverlapReport(dsc=100.0, psc=100.0, sen=100.0, n_pred=0, n_gt=0, n_overlap=0,
                             flags=[BOTH_EMPTY])
    flags = []
    if n_pred == 0:
        flags.append(PRED_EMPTY)
    if n_gt == 0:
        flags.append(TRUTH_EMPTY)
    return OverlapReport(
        dsc=100.0 * 2 * n_overlap / (n_pred + n_gt),
        psc=100.0 * n_overlap / n_pred if n_pred else 0.0,
        sen=100.0 * n_overlap / n_gt if n_gt else 0.0,
        n_pred=n_pred,
        n_gt=n_gt,
        n_overlap=n_overlap,
        flags=flags,
    )


def dsc(pred: MaskLike, gt: MaskLike) -> float:
    return overlap_report(pred, gt).dsc


def psc(pred: MaskLike, gt: MaskLike) -> float:
    return overlap_report(pred, gt).psc


def sen(pred: MaskLike, gt: MaskLike) -> float:
    return overlap_report(pred, gt).sen
