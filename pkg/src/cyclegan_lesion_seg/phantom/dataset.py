"""Phantom train/test dataset on disk: labelled slice manifests and held-out volumes."""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
from pydantic import ValidationError

from ..imgvol import (
    apply_mask_zero_background,
    extract_slices,
    write_manifest,
    write_mask,
    write_slice,
    write_volume,
    window_normalize,
)
from ..shared.errors import ConfigValidationError, MalformedHeaderError
from ..shared.schemas import DatasetConfig, ImgvolConfig, SliceRecord, VolumeRecord
from .generator import PhantomCase, gen_infected

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

TRAIN_MANIFEST = "train/manifest.json"
TEST_VOLUMES = "test/volumes.json"


@dataclass
class PhantomDataset:
    root: Path
    train_manifest: Path
    test_volumes: Path
    n_healthy: int
    n_infected: int
    train_volume_ids: List[str]
    test_volume_ids: List[str]


def volume_seeds(master_seed: int, n: int) -> List[int]:
    """n distinct per-volume seeds drawn from the master seed."""
    rng = np.random.default_rng(master_seed)
    return [int(s) for s in rng.choice(2 ** 31, size=n, replace=False)]


def classify_slices(case: PhantomCase) -> List[Optional[str]]:
    """Per axial slice: 'infected' if it meets the lesion mask, 'healthy' if untouched, else None."""
    labels: List[Optional[str]] = []
    for z in range(case.volume.data.shape[0]):
        if case.lesion.data[z].any():
            labels.append("infected")
        elif np.array_equal(case.volume.data[z], case.healthy.data[z]):
            labels.append("healthy")
        else:
            labels.append(None)
    return labels


def write_volume_records(records: List[VolumeRecord], path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump([r.model_dump(mode="json") for r in records], f, indent=2)
    return path


def read_volume_records(path: PathLike) -> List[VolumeRecord]:
    path = Path(path)
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return [VolumeRecord.model_validate(item) for item in json.load(f)]
    except (json.JSONDecodeError, ValidationError, TypeError) as e:
        raise MalformedHeaderError(f"cannot parse volume records {path}: {e}") from e


def _write_test_case(case: PhantomCase, volume_id: str, seed: int, test_dir: Path) -> VolumeRecord:
    case_dir = test_dir / volume_id
    names = {}
    for key, writer, obj in (
        ("volume", write_volume, case.volume),
        ("lung", write_mask, case.lung),
        ("lesion", write_mask, case.lesion),
        ("healthy", write_volume, case.healthy),
    ):
        writer(obj, case_dir / f"{key}.json")
        names[key] = f"{volume_id}/{key}.json"
    return VolumeRecord(
        volume_id=volume_id, seed=seed, lesion_count=case.lesion_count, flags=case.flags, **names
    )


def gen_dataset(
    cfg: DatasetConfig, out_dir: PathLike, imgvol: Optional[ImgvolConfig] = None
) -> PhantomDataset:
    """Training slices from infected phantoms plus held-out test volumes with ground truth.

    Training volumes are generated in seed order until the requested numbers
    of healthy and infected slices are collected. Test volumes use seeds
    disjoint from every training seed.
    """
    imgvol = imgvol or ImgvolConfig()
    root = Path(out_dir)
    seeds = volume_seeds(cfg.spec.seed, cfg.max_train_volumes + cfg.n_test)
    train_seeds, test_seeds = seeds[:cfg.max_train_volumes], seeds[cfg.max_train_volumes:]

    wanted = {"healthy": cfg.n_train_healthy, "infected": cfg.n_train_infected}
    got = {"healthy": 0, "infected": 0}
    records: List[SliceRecord] = []
    train_ids: List[str] = []
    for i, seed in enumerate(train_seeds):
        if got == wanted:
            break
        volume_id = f"train_{i:04d}"
        case = gen_infected(cfg.spec.model_copy(update={"seed": seed}))
        labels = classify_slices(case)
        norm = apply_mask_zero_background(
            window_normalize(case.volume, imgvol.window_lo, imgvol.window_hi), case.lung
        )
        used = False
        for image in extract_slices(norm, case.lung, side=imgvol.crop_side, volume_id=volume_id):
            label = labels[image.slice_index]
            if label is None or got[label] >= wanted[label]:
                continue
            rel = f"{label}/{volume_id}_z{image.slice_index:03d}.json"
            write_slice(image.model_copy(update={"label": label}), root / "train" / rel)
            records.append(
                SliceRecord(path=rel, slice_index=image.slice_index, label=label, volume_id=volume_id)
            )
            got[label] += 1
            used = True
        if used:
            train_ids.append(volume_id)
    if got != wanted:
        raise ConfigValidationError(
            f"{cfg.max_train_volumes} training volumes yield {got}, requested {wanted}; "
            f"raise phantom.max_train_volumes"
        )
    train_manifest = write_manifest(records, root / TRAIN_MANIFEST)

    volume_records = []
    for j, seed in enumerate(test_seeds):
        case = gen_infected(cfg.spec.model_copy(update={"seed": seed}))
        volume_records.append(_write_test_case(case, f"test_{j:04d}", seed, root / "test"))
    test_volumes = write_volume_records(volume_records, root / TEST_VOLUMES)

    logger.info(
        f"Phantom dataset in {root}: {got['healthy']} healthy and {got['infected']} infected "
        f"training slices from {len(train_ids)} volumes, {len(volume_records)} test volumes"
    )
    return PhantomDataset(
        root=root,
        train_manifest=train_manifest,
        test_volumes=test_volumes,
        n_healthy=got["healthy"],
        n_infected=got["infected"],
        train_volume_ids=train_ids,
        test_volume_ids=[r.volume_id for r in volume_records],
    )
