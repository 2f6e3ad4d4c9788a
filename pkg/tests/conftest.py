"""Test configuration and utilities."""

import tempfile
from pathlib import Path

import numpy as np
import pytest

from cyclegan_lesion_seg.phantom import gen_infected
from cyclegan_lesion_seg.shared.schemas import (
    CycleGanConfig,
    DiscriminatorConfig,
    GeneratorConfig,
    NetsConfig,
    PhantomSpec,
    TrainConfig,
)

# Small enough for the pure-numpy networks to run a few iterations quickly
TINY_GENERATOR = {"stages": 3, "base_channels": 2, "max_channels": 4, "input_side": 8}
TINY_DISCRIMINATOR = {
    "layers": 3,
    "kernel": 3,
    "strides": [2, 1, 1],
    "channels": [4, 4, 1],
    "norm_layers": [2],
    "receptive_field_target": None,
}

SMALL_PHANTOM = {"size": 32, "lesion_count": (1, 2), "lesion_radius": (1.5, 2.5)}


@pytest.fixture
def temp_dir():
    """Create a temporary working directory."""
    with tempfile.TemporaryDirectory() as temp_dir:
        yield Path(temp_dir)


@pytest.fixture
def temp_config_dir():
    """Create a temporary directory with a small run configuration."""
    with tempfile.TemporaryDirectory() as temp_dir:
        config_dir = Path(temp_dir) / "config"
        config_dir.mkdir()

        config_content = """
imgvol:
  window_lo: -800.0
  window_hi: 100.0
  crop_side: 8
nets:
  generator:
    stages: 3
    base_channels: 2
    max_channels: 4
    input_side: 8
  discriminator:
    layers: 3
    kernel: 3
    strides: [2, 1, 1]
    channels: [4, 4, 1]
    norm_layers: [2]
    receptive_field_target: null
cyclegan:
  train:
    epochs: 4
    decay_start_epoch: 2
    crop_side: 8
    seed: 3
  weights:
    lambda_cycle: 10.0
    lambda_identity: 5.0
postproc:
  method: otsu
phantom:
  spec:
    size: 32
    seed: 11
    lesion_count: [1, 2]
    lesion_radius: [1.5, 2.5]
  n_train_healthy: 4
  n_train_infected: 4
  n_test: 2
  max_train_volumes: 10
paths:
  data_dir: "${LESION_SEG_TEST_DATA:data/test}"
logging:
  level: WARNING
"""
        with open(config_dir / "config.yaml", 'w') as f:
            f.write(config_content)

        yield temp_dir


@pytest.fixture
def tiny_nets_config() -> NetsConfig:
    """Generator and discriminator small enough for full training steps in tests."""
    return NetsConfig(
        generator=GeneratorConfig(**TINY_GENERATOR),
        discriminator=DiscriminatorConfig(**TINY_DISCRIMINATOR),
    )


@pytest.fixture
def tiny_cyclegan_config() -> CycleGanConfig:
    return CycleGanConfig(train=TrainConfig(epochs=3, decay_start_epoch=1, crop_side=8, seed=5))


@pytest.fixture
def slice_pools():
    """Unpaired 8x8 pools of infected-like and healthy-like images in [-1, 1]."""
    rng = np.random.default_rng(42)
    x_pool = [np.tanh(rng.normal(0.3, 0.5, size=(8, 8))).astype(np.float32) for _ in range(4)]
    y_pool = [np.tanh(rng.normal(-0.3, 0.5, size=(8, 8))).astype(np.float32) for _ in range(4)]
    return x_pool, y_pool


@pytest.fixture(scope="session")
def small_phantom():
    """A 32^3 infected phantom with its paired healthy volume, generated once."""
    return gen_infected(PhantomSpec(seed=7, **SMALL_PHANTOM))


@pytest.fixture(scope="session")
def paired_phantom_cohort():
    """Ten 64^3 phantoms at the shipped phantom settings, each with its lesion-free twin."""
    return [gen_infected(PhantomSpec(seed=100 + i)) for i in range(10)]
