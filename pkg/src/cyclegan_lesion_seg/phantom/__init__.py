"""Synthetic chest phantoms with paired ground truth."""

from .dataset import (
    TEST_VOLUMES,
    TRAIN_MANIFEST,
    PhantomDataset,
    classify_slices,
    gen_dataset,
    read_volume_records,
    volume_seeds,
    write_volume_records,
)
from .generator import PhantomCase, gen_healthy, gen_infected, lesion_weight, lung_layout

__all__ = [
    "PhantomCase",
    "PhantomDataset",
    "TEST_VOLUMES",
    "TRAIN_MANIFEST",
    "classify_slices",
    "gen_dataset",
    "gen_healthy",
    "gen_infected",
    "lesion_weight",
    "lung_layout",
    "read_volume_records",
    "volume_seeds",
    "write_volume_records",
]
