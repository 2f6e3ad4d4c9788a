"""Parameter serialization: JSON manifest plus one raw little-endian blob."""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from ..shared.errors import MalformedHeaderError, PayloadSizeError, ShapeMismatchError
from ..shared.schemas import DiscriminatorConfig, GeneratorConfig
from .discriminator import build_discriminator
from .generator import Generator, build_generator
from .layers import Network

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

_BLOB_DTYPES = {"float32": "<f4", "float64": "<f8"}


class ArrayEntry(BaseModel):
    name: str
    shape: List[int]
    offset: int = Field(ge=0, description="Element offset into the blob")


class BlobManifest(BaseModel):
    """Layout of a parameter blob, with an optional network config echo."""
    dtype: str = "float32"
    byte_order: str = "little"
    blob: str
    arrays: List[ArrayEntry]
    network: Optional[str] = Field(default=None, description="'generator' or 'discriminator'")
    config: Optional[Dict[str, Any]] = None


def save_arrays(
    arrays: Dict[str, np.ndarray],
    path: PathLike,
    network: Optional[str] = None,
    config: Optional[Dict[str, Any]] = None,
    dtype: str = "float32",
) -> Path:
    """Write ``<path>.json`` and ``<path>.bin``; arrays keep their insertion order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    manifest_path = path.with_suffix(".json")
    blob_path = path.with_suffix(".bin")

    entries = []
    offset = 0
    for name, arr in arrays.items():
        entries.append(ArrayEntry(name=name, shape=list(arr.shape), offset=offset))
        offset += int(arr.size)
    manifest = BlobManifest(
        dtype=dtype, blob=blob_path.name, arrays=entries, network=network, config=config
    )

    with open(blob_path, 'wb') as f:
        for arr in arrays.values():
            f.write(np.ascontiguousarray(arr, dtype=_BLOB_DTYPES[dtype]).tobytes())
    with open(manifest_path, 'w', encoding='utf-8') as f:
        json.dump(manifest.model_dump(mode="json", exclude_none=True), f, indent=2)
    return manifest_path


def load_arrays(path: PathLike) -> Tuple[Dict[str, np.ndarray], BlobManifest]:
    """Inverse of save_arrays; returns native-endian arrays and the manifest."""
    manifest_path = Path(path).with_suffix(".json")
    try:
        with open(manifest_path, 'r', encoding='utf-8') as f:
            manifest = BlobManifest.model_validate(json.load(f))
    except (FileNotFoundError, json.JSONDecodeError, ValidationError) as e:
        raise MalformedHeaderError(f"cannot read parameter manifest {manifest_path}: {e}") from e
    if manifest.dtype not in _BLOB_DTYPES or manifest.byte_order != "little":
        raise MalformedHeaderError(f"{manifest_path}: unsupported blob {manifest.dtype}/{manifest.byte_order}")

    blob_path = manifest_path.parent / manifest.blob
    flat = np.fromfile(blob_path, dtype=_BLOB_DTYPES[manifest.dtype])
    total = sum(int(np.prod(e.shape)) for e in manifest.arrays)
    if flat.size != total:
        raise PayloadSizeError(f"{blob_path} holds {flat.size} values, manifest declares {total}")

    native = np.float32 if manifest.dtype == "float32" else np.float64
    arrays = {}
    for e in manifest.arrays:
        n = int(np.prod(e.shape))
        arrays[e.name] = flat[e.offset:e.offset + n].reshape(e.shape).astype(native)
    return arrays, manifest


def _network_kind(net: Network) -> str:
    return "generator" if isinstance(net, Generator) else "discriminator"


def save_network(net: Network, path: PathLike) -> Path:
    """Parameters plus a config echo used to validate shapes on load."""
    dtype = "float64" if any(p.dtype == np.float64 for p in net.parameters()) else "float32"
    return save_arrays(
        net.state_dict(),
        path,
        network=_network_kind(net),
        config=net.cfg.model_dump(mode="json"),
        dtype=dtype,
    )


def load_network(path: PathLike, expected=None) -> Network:
    """Rebuild a network from its saved config echo and fill in the parameters.

    When ``expected`` (a GeneratorConfig or DiscriminatorConfig) is given, the
    saved echo must match it exactly.
    """
    arrays, manifest = load_arrays(path)
    if manifest.network is None or manifest.config is None:
        raise MalformedHeaderError(f"{path}: parameter manifest has no network config echo")
    if manifest.network == "generator":
        cfg = GeneratorConfig.model_validate(manifest.config)
        net: Network = build_generator(cfg)
    elif manifest.network == "discriminator":
        cfg = DiscriminatorConfig.model_validate(manifest.config)
        net = build_discriminator(cfg)
    else:
        raise MalformedHeaderError(f"{path}: unknown network kind {manifest.network!r}")
    if expected is not None and expected.model_dump() != cfg.model_dump():
        raise ShapeMismatchError(f"{path}: saved {manifest.network} config differs from the run config")
    if manifest.dtype == "float64":
        net.astype(np.float64)
    net.load_state_dict(arrays)
    logger.debug(f"Loaded {manifest.network} from {path} ({net.parameter_count()} parameters)")
    return net
