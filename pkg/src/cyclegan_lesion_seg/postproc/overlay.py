"""PNG renders comparing a predicted lesion mask with ground truth."""

from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image

from ..imgvol import to_uint8_gray
from ..shared.errors import ShapeMismatchError
from .filters import contour

PathLike = Union[str, Path]

PRED_COLOR = (255, 0, 0)
TRUTH_COLOR = (0, 255, 0)
BOTH_COLOR = (255, 255, 0)
TP_COLOR = (0, 200, 0)
FN_COLOR = (220, 0, 0)
FP_COLOR = (0, 80, 255)


def _gray_rgb(image: np.ndarray) -> np.ndarray:
    return np.repeat(to_uint8_gray(image)[..., None], 3, axis=2)


def _check(image: np.ndarray, *masks: np.ndarray) -> None:
    for m in masks:
        if m.shape != image.shape:
            raise ShapeMismatchError(f"overlay: mask {m.shape} does not match image {image.shape}")


def contour_overlay(image: np.ndarray, pred: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """RGB array: prediction outline red, ground-truth outline green, shared pixels yellow."""
    _check(image, pred, truth)
    rgb = _gray_rgb(image)
    p, t = contour(pred).astype(bool), contour(truth).astype(bool)
    rgb[p & ~t] = PRED_COLOR
    rgb[t & ~p] = TRUTH_COLOR
    rgb[p & t] = BOTH_COLOR
    return rgb


def confusion_overlay(
    image: np.ndarray, pred: np.ndarray, truth: np.ndarray, alpha: float = 0.5
) -> np.ndarray:
    """RGB array: true positives green, false negatives red, false positives blue, blended."""
    _check(image, pred, truth)
    rgb = _gray_rgb(image).astype(np.float64)
    p, t = pred.astype(bool), truth.astype(bool)
    for region, color in ((p & t, TP_COLOR), (~p & t, FN_COLOR), (p & ~t, FP_COLOR)):
        rgb[region] = (1.0 - alpha) * rgb[region] + alpha * np.asarray(color, dtype=np.float64)
    return np.round(rgb).astype(np.uint8)


def _save(rgb: np.ndarray, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(rgb).save(path)
    return path


def write_contour_overlay_png(
    image: np.ndarray, pred: np.ndarray, truth: np.ndarray, path: PathLike
) -> Path:
    return _save(contour_overlay(image, pred, truth), path)


def write_confusion_overlay_png(
    image: np.ndarray, pred: np.ndarray, truth: np.ndarray, path: PathLike
) -> Path:
    return _save(confusion_overlay(image, pred, truth), path)
