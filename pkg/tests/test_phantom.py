"""Tests for the synthetic chest phantom and its on-disk dataset."""

import json

import numpy as np
import pytest
from scipy import ndimage

from cyclegan_lesion_seg.imgvol import load_manifest_slices, preprocess_volume, read_mask, read_volume
from cyclegan_lesion_seg.phantom import (
    classify_slices,
    gen_dataset,
    gen_healthy,
    gen_infected,
    lesion_weight,
    lung_layout,
    read_volume_records,
    volume_seeds,
)
from cyclegan_lesion_seg.shared.errors import ConfigValidationError
from cyclegan_lesion_seg.shared.schemas import DatasetConfig, ImgvolConfig, PhantomSpec

SMALL_PHANTOM = {"size": 32, "lesion_count": (1, 2), "lesion_radius": (1.5, 2.5)}


@pytest.fixture
def small_dataset_config():
    return DatasetConfig(
        spec=PhantomSpec(seed=11, **SMALL_PHANTOM),
        n_train_healthy=4,
        n_train_infected=4,
        n_test=2,
        max_train_volumes=10,
    )


class TestHealthy:
    """Test the lesion-free phantom."""

    def test_deterministic(self):
        """Test the same seed gives bit-identical volumes."""
        spec = PhantomSpec(size=24, seed=3)
        (v1, m1), (v2, m2) = gen_healthy(spec), gen_healthy(spec)
        np.testing.assert_array_equal(v1.data, v2.data)
        np.testing.assert_array_equal(m1.data, m2.data)
        other, _ = gen_healthy(PhantomSpec(size=24, seed=4))
        assert not np.array_equal(v1.data, other.data)

    def test_lung_inside_body(self):
        """Test both lungs are non-empty, disjoint and inside the body."""
        body, left, right = lung_layout(32)
        assert left.any() and right.any()
        assert not (left & right).any()
        assert np.all(body[left | right])
        lung = left | right
        for axis in range(3):
            assert not lung.take(0, axis=axis).any() and not lung.take(-1, axis=axis).any()

    def test_lung_hu_audit(self):
        """Test lung voxels lie in the lung range or carry the vessel value."""
        spec = PhantomSpec(size=32, seed=5, vessel_density=5e-4)
        vol, lung = gen_healthy(spec)
        values = vol.data[lung.as_bool()]
        in_range = (values >= spec.lung_hu[0] - 1e-3) & (values <= spec.lung_hu[1] + 1e-3)
        assert np.all(in_range | (values == spec.vessel_hu))
        assert (values == spec.vessel_hu).any()

    def test_background_is_air(self):
        """Test voxels outside the body hold the air value."""
        spec = PhantomSpec(size=24, seed=1)
        vol, _ = gen_healthy(spec)
        body, _, _ = lung_layout(24)
        assert np.all(vol.data[~body] == spec.air_hu)


class TestInfected:
    """Test lesion placement and the paired healthy volume."""

    def test_lesion_inside_lung(self, small_phantom):
        """Test the lesion mask is a non-empty subset of the lung."""
        assert small_phantom.lesion_count >= 1
        assert small_phantom.lesion.count > 0
        assert np.all(small_phantom.lung.data[small_phantom.lesion.as_bool()] == 1)

    def test_lesion_contrast(self, small_phantom):
        """Test lesion voxels are at least 50 HU above the lung range."""
        spec = PhantomSpec(seed=7, **SMALL_PHANTOM)
        values = small_phantom.volume.data[small_phantom.lesion.as_bool()]
        assert values.min() >= spec.lung_hu[1] + 50
        assert values.max() <= spec.lesion_hu[1]

    def test_difference_support(self, small_phantom):
        """Test infected and healthy differ only near the lesion and never outside the lung."""
        changed = small_phantom.volume.data != small_phantom.healthy.data
        assert changed.any()
        assert not changed[small_phantom.lung.data == 0].any()
        near = ndimage.binary_dilation(
            small_phantom.lesion.as_bool(), structure=np.ones((3, 3, 3), dtype=bool), iterations=3
        )
        assert not changed[~near].any()

    def test_paired_healthy_matches_gen_healthy(self, small_phantom):
        """Test the returned healthy volume is the same body without lesions."""
        healthy, lung = gen_healthy(PhantomSpec(seed=7, **SMALL_PHANTOM))
        np.testing.assert_array_equal(small_phantom.healthy.data, healthy.data)
        np.testing.assert_array_equal(small_phantom.lung.data, lung.data)

    def test_zero_lesions(self):
        """Test a zero lesion count leaves the volume untouched."""
        case = gen_infected(PhantomSpec(size=24, seed=2, lesion_count=(0, 0)))
        assert case.lesion_count == 0 and case.lesion.count == 0
        np.testing.assert_array_equal(case.volume.data, case.healthy.data)

    def test_placement_failure_is_flagged(self):
        """Test lesions too large for the lung are dropped with a flag."""
        case = gen_infected(
            PhantomSpec(size=16, seed=0, lesion_count=(1, 1), lesion_radius=(7.0, 8.0), max_placement_retries=3)
        )
        assert case.lesion_count == 0
        assert case.flags and "not placed" in case.flags[0]

    def test_lesion_weight_profile(self):
        """Test the weight is 1 inside, ramps down over the soft edge and is 0 beyond it."""
        w = lesion_weight(15, np.array([7.0, 7.0, 7.0]), np.array([3.0, 3.0, 3.0]), 2.0, 1.0)
        assert w[7, 7, 7] == 1.0 and w[7, 7, 10] == 1.0
        assert 0.0 < w[7, 10, 9] < 1.0
        assert w[7, 7, 11] == 0.0 and w[7, 7, 12] == 0.0

    def test_preprocessed_slices_valid(self, small_phantom):
        """Test windowed, masked slices of a phantom are valid slice images."""
        slices = preprocess_volume(small_phantom.volume, small_phantom.lung, side=32)
        assert slices
        for s in slices:
            assert s.data.min() >= -1.0 and s.data.max() <= 1.0
            assert not s.data[s.lung == 0].any()


class TestDataset:
    """Test the train/test layout on disk."""

    def test_volume_seeds(self):
        """Test per-volume seeds are distinct and reproducible."""
        seeds = volume_seeds(5, 50)
        assert len(set(seeds)) == 50
        assert seeds == volume_seeds(5, 50)

    def test_classify_slices(self, small_phantom):
        """Test lesion slices are infected and untouched lung slices healthy."""
        labels = classify_slices(small_phantom)
        for z, label in enumerate(labels):
            if small_phantom.lesion.data[z].any():
                assert label == "infected"
            elif label == "healthy":
                np.testing.assert_array_equal(small_phantom.volume.data[z], small_phantom.healthy.data[z])
        assert "infected" in labels and "healthy" in labels

    def test_layout_and_counts(self, small_dataset_config, temp_dir):
        """Test manifests, slice files and test volumes are written with the requested counts."""
        ds = gen_dataset(small_dataset_config, temp_dir, ImgvolConfig(crop_side=32))

        assert ds.n_healthy == 4 and ds.n_infected == 4
        assert ds.train_manifest == temp_dir / "train" / "manifest.json"
        healthy = load_manifest_slices(ds.train_manifest, "healthy")
        infected = load_manifest_slices(ds.train_manifest, "infected")
        assert len(healthy) == 4 and len(infected) == 4
        assert all(s.label == "infected" and s.data.shape == (32, 32) for s in infected)
        assert list((temp_dir / "train" / "infected").glob("train_*_z*.json"))

        records = read_volume_records(ds.test_volumes)
        assert [r.volume_id for r in records] == ds.test_volume_ids == ["test_0000", "test_0001"]
        case_dir = temp_dir / "test" / "test_0000"
        vol = read_volume(case_dir / "volume.json")
        lung = read_mask(case_dir / "lung.json")
        lesion = read_mask(case_dir / "lesion.json")
        healthy_vol = read_volume(case_dir / "healthy.json")
        assert vol.data.shape == lung.data.shape == lesion.data.shape == healthy_vol.data.shape == (32, 32, 32)
        assert np.all(lung.data[lesion.data == 1] == 1)

    def test_train_and_test_disjoint(self, small_dataset_config, temp_dir):
        """Test no seed or volume is shared between training and test."""
        ds = gen_dataset(small_dataset_config, temp_dir, ImgvolConfig(crop_side=32))
        assert not set(ds.train_volume_ids) & set(ds.test_volume_ids)
        train_seeds = set(volume_seeds(11, small_dataset_config.max_train_volumes + 2)[:10])
        assert not train_seeds & {r.seed for r in read_volume_records(ds.test_volumes)}

    def test_regeneration_is_identical(self, small_dataset_config, temp_dir):
        """Test the same master seed reproduces the manifests."""
        a = gen_dataset(small_dataset_config, temp_dir / "a", ImgvolConfig(crop_side=32))
        b = gen_dataset(small_dataset_config, temp_dir / "b", ImgvolConfig(crop_side=32))
        with open(a.train_manifest) as fa, open(b.train_manifest) as fb:
            assert json.load(fa) == json.load(fb)
        with open(a.test_volumes) as fa, open(b.test_volumes) as fb:
            assert json.load(fa) == json.load(fb)

    def test_unmet_quota(self, temp_dir):
        """Test too few training volumes for the requested slice counts."""
        cfg = DatasetConfig(
            spec=PhantomSpec(seed=1, **SMALL_PHANTOM),
            n_train_healthy=1,
            n_train_infected=500,
            n_test=1,
            max_train_volumes=1,
        )
        with pytest.raises(ConfigValidationError, match="max_train_volumes"):
            gen_dataset(cfg, temp_dir, ImgvolConfig(crop_side=32))
