"""CT volume data model, preprocessing and file I/O."""

from .preprocessing import (
    apply_mask_zero_background,
    crop_start,
    extract_slices,
    lung_bbox,
    paste_slice,
    preprocess_volume,
    resample_isotropic,
    resample_mask_isotropic,
    window_normalize,
)
from .volume import BinaryMask, CtVolume, SliceImage, require_same_grid
from .volume_io import (
    load_manifest_slices,
    read_manifest,
    read_mask,
    read_nifti,
    read_slice,
    read_volume,
    to_uint8_gray,
    write_manifest,
    write_mask,
    write_slice,
    write_slice_png,
    write_volume,
)

__all__ = [
    "BinaryMask",
    "CtVolume",
    "SliceImage",
    "apply_mask_zero_background",
    "crop_start",
    "extract_slices",
    "load_manifest_slices",
    "lung_bbox",
    "paste_slice",
    "preprocess_volume",
    "read_manifest",
    "read_mask",
    "read_nifti",
    "read_slice",
    "read_volume",
    "require_same_grid",
    "resample_isotropic",
    "resample_mask_isotropic",
    "to_uint8_gray",
    "window_normalize",
    "write_manifest",
    "write_mask",
    "write_slice",
    "write_slice_png",
    "write_volume",
]
