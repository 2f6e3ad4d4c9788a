"""Difference-map post-processing that turns synthetic healthy slices into lesion masks."""

from .binarize import (
    Binarization,
    best_contiguous_split,
    between_class_variance,
    kmeans_binarize,
    lloyd_1d,
    otsu_binarize,
    otsu_histogram,
    split_sse,
)
from .difference import DifferenceMap, subtract
from .filters import (
    CROSS,
    contour,
    dilate,
    erode,
    fill_holes,
    gaussian_kernel,
    gaussian_smooth_mask,
    median_filter,
)
from .overlay import (
    confusion_overlay,
    contour_overlay,
    write_confusion_overlay_png,
    write_contour_overlay_png,
)
from .pipeline import SliceSegmentation, binarize, postprocess_pipeline, segment_volume

__all__ = [
    "Binarization",
    "CROSS",
    "DifferenceMap",
    "SliceSegmentation",
    "best_contiguous_split",
    "between_class_variance",
    "binarize",
    "confusion_overlay",
    "contour",
    "contour_overlay",
    "dilate",
    "erode",
    "fill_holes",
    "gaussian_kernel",
    "gaussian_smooth_mask",
    "kmeans_binarize",
    "lloyd_1d",
    "median_filter",
    "otsu_binarize",
    "otsu_histogram",
    "postprocess_pipeline",
    "segment_volume",
    "split_sse",
    "subtract",
    "write_confusion_overlay_png",
    "write_contour_overlay_png",
]
