"""Native file format: a JSON header next to a raw little-endian payload.

``write_volume(vol, "case01.json")`` produces ``case01.json`` and
``case01.raw``. Payload bytes are the array in (z, y, x) order with x fastest.
Volumes and slices are float32, masks uint8.
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from PIL import Image
from pydantic import ValidationError

from ..shared.errors import MalformedHeaderError, PayloadSizeError
from ..shared.schemas import SliceRecord, VolumeHeader
from .volume import BinaryMask, CtVolume, SliceImage

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

_DTYPES: Dict[str, str] = {"float32": "<f4", "uint8": "u1"}


def _write_raw(arr: np.ndarray, path: Path, dtype: str) -> None:
    np.ascontiguousarray(arr).astype(_DTYPES[dtype], copy=False).tofile(path)


def _read_raw(path: Path, dtype: str, shape: Tuple[int, ...]) -> np.ndarray:
    expected = int(np.prod(shape)) * np.dtype(_DTYPES[dtype]).itemsize
    try:
        actual = path.stat().st_size
    except FileNotFoundError as e:
        raise PayloadSizeError(f"payload {path} is missing") from e
    if actual != expected:
        raise PayloadSizeError(
            f"payload {path} holds {actual} bytes, header implies {expected} for shape {shape}"
        )
    arr = np.fromfile(path, dtype=_DTYPES[dtype]).reshape(shape)
    return arr.astype(np.float32 if dtype == "float32" else np.uint8, copy=False)


def _write_header(header: VolumeHeader, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(header.model_dump(mode="json", exclude_none=True), f, indent=2)


def _read_header(path: PathLike, kind: str) -> Tuple[VolumeHeader, Path]:
    path = Path(path)
    try:
        with open(path, 'r', encoding='utf-8') as f:
            raw = json.load(f)
        header = VolumeHeader.model_validate(raw)
    except (FileNotFoundError, IsADirectoryError) as e:
        raise MalformedHeaderError(f"header {path} is missing") from e
    except (json.JSONDecodeError, UnicodeDecodeError, ValidationError, TypeError) as e:
        raise MalformedHeaderError(f"cannot parse header {path}: {e}") from e
    if header.kind != kind:
        raise MalformedHeaderError(f"{path} holds a {header.kind}, expected a {kind}")
    return header, path


def _array_shape(dims: Tuple[int, int, int]) -> Tuple[int, int, int]:
    nx, ny, nz = dims
    return (nz, ny, nx)


def write_volume(vol: CtVolume, path: PathLike) -> Path:
    """Write a volume header and its float32 payload; returns the header path."""
    path = Path(path)
    payload = path.with_suffix(".raw")
    header = VolumeHeader(
        kind="volume",
        dims=vol.dims,
        spacing=vol.spacing,
        origin=vol.origin,
        dtype="float32",
        payload=payload.name,
    )
    _write_header(header, path)
    _write_raw(vol.data, payload, "float32")
    return path


def read_volume(path: PathLike) -> CtVolume:
    header, path = _read_header(path, "volume")
    data = _read_raw(path.parent / header.payload, "float32", _array_shape(header.dims))
    try:
        return CtVolume(data=data, spacing=header.spacing, origin=header.origin)
    except ValidationError as e:
        raise MalformedHeaderError(f"volume payload {path} is not a valid volume: {e}") from e


def write_mask(mask: BinaryMask, path: PathLike) -> Path:
    """Write a mask header and its uint8 payload.

    2-D masks are stored with nz = 1 and come back 2-D from ``read_mask``.
    """
    path = Path(path)
    payload = path.with_suffix(".raw")
    data = mask.data if mask.data.ndim == 3 else mask.data[None]
    header = VolumeHeader(
        kind="mask",
        dims=tuple(reversed(data.shape)),
        spacing=mask.spacing,
        origin=mask.origin,
        dtype="uint8",
        payload=payload.name,
        ndim=mask.data.ndim,
    )
    _write_header(header, path)
    _write_raw(data, payload, "uint8")
    return path


def read_mask(path: PathLike) -> BinaryMask:
    header, path = _read_header(path, "mask")
    data = _read_raw(path.parent / header.payload, "uint8", _array_shape(header.dims))
    if header.ndim == 2:
        data = data[0]
    try:
        return BinaryMask(data=data, spacing=header.spacing, origin=header.origin)
    except ValidationError as e:
        raise MalformedHeaderError(f"mask payload {path} is not binary: {e}") from e


def write_slice(image: SliceImage, path: PathLike) -> Path:
    """Write a slice as an nz = 1 float32 volume plus its uint8 lung mask."""
    path = Path(path)
    payload = path.with_suffix(".raw")
    lung_payload = path.with_name(f"{path.stem}.lung.raw")
    header = VolumeHeader(
        kind="slice",
        dims=(image.width, image.height, 1),
        spacing=(1.0, 1.0, 1.0),
        dtype="float32",
        payload=payload.name,
        lung_payload=lung_payload.name,
        label=image.label,
        volume_id=image.volume_id,
        slice_index=image.slice_index,
        crop_origin=image.crop_origin,
    )
    _write_header(header, path)
    _write_raw(image.data, payload, "float32")
    _write_raw(image.lung, lung_payload, "uint8")
    return path


def read_slice(path: PathLike) -> SliceImage:
    header, path = _read_header(path, "slice")
    nx, ny, _ = header.dims
    data = _read_raw(path.parent / header.payload, "float32", (ny, nx))
    lung = _read_raw(path.parent / header.lung_payload, "uint8", (ny, nx))
    try:
        return SliceImage(
            data=data,
            lung=lung,
            label=header.label or "unknown",
            volume_id=header.volume_id or path.stem,
            slice_index=header.slice_index or 0,
            crop_origin=header.crop_origin or (0, 0),
        )
    except ValidationError as e:
        raise MalformedHeaderError(f"slice {path} violates slice invariants: {e}") from e


def write_manifest(records: List[SliceRecord], path: PathLike) -> Path:
    """JSON list of {path, slice_index, label, volume_id}."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump([r.model_dump(mode="json") for r in records], f, indent=2)
    logger.debug(f"Wrote manifest {path} with {len(records)} entries")
    return path


def read_manifest(path: PathLike) -> List[SliceRecord]:
    path = Path(path)
    try:
        with open(path, 'r', encoding='utf-8') as f:
            raw = json.load(f)
        if not isinstance(raw, list):
            raise TypeError("manifest must be a JSON list")
        return [SliceRecord.model_validate(item) for item in raw]
    except (json.JSONDecodeError, ValidationError, TypeError) as e:
        raise MalformedHeaderError(f"cannot parse manifest {path}: {e}") from e


def load_manifest_slices(path: PathLike, label: Optional[str] = None) -> List[SliceImage]:
    """Read every slice of a manifest, optionally keeping one label only."""
    path = Path(path)
    records = read_manifest(path)
    return [
        read_slice(path.parent / r.path)
        for r in records
        if label is None or r.label == label
    ]


def to_uint8_gray(values: np.ndarray) -> np.ndarray:
    """Linear map of [-1, 1] onto 0..255."""
    v = np.clip(np.asarray(values, dtype=np.float64), -1.0, 1.0)
    return np.round((v + 1.0) / 2.0 * 255.0).astype(np.uint8)


def write_slice_png(image: Union[SliceImage, np.ndarray], path: PathLike) -> Path:
    """8-bit grayscale render: -1 is black, +1 is white."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    values = image.data if isinstance(image, SliceImage) else image
    Image.fromarray(to_uint8_gray(values)).save(path)
    return path


def read_nifti(path: PathLike) -> CtVolume:
    """Import a NIfTI-1 volume (requires the optional ``nibabel`` extra)."""
    try:
        import nibabel as nib
    except ImportError as e:
        raise ImportError("NIfTI import needs nibabel: pip install 'cyclegan-lesion-seg[nifti]'") from e

    image = nib.load(str(path))
    data = np.asarray(image.get_fdata(dtype=np.float32))
    if data.ndim != 3:
        raise MalformedHeaderError(f"{path}: expected a 3-D image, got shape {data.shape}")
    spacing = tuple(float(x) for x in image.header.get_zooms()[:3])
    origin = tuple(float(x) for x in image.affine[:3, 3])
    # nibabel arrays are (x, y, z)
    return CtVolume(data=np.transpose(data, (2, 1, 0)), spacing=spacing, origin=origin)
