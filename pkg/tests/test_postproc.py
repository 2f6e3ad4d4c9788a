"""Tests for the subtraction post-processing chain."""

from collections import deque

import numpy as np
import pytest
from PIL import Image

from cyclegan_lesion_seg.imgvol import SliceImage, preprocess_volume
from cyclegan_lesion_seg.metrics import dsc
from cyclegan_lesion_seg.postproc import (
    DifferenceMap,
    contour,
    confusion_overlay,
    contour_overlay,
    dilate,
    erode,
    fill_holes,
    gaussian_kernel,
    gaussian_smooth_mask,
    kmeans_binarize,
    median_filter,
    otsu_binarize,
    postprocess_pipeline,
    segment_volume,
    subtract,
    write_confusion_overlay_png,
)
from cyclegan_lesion_seg.shared.errors import ShapeMismatchError
from cyclegan_lesion_seg.shared.schemas import PostprocConfig

N4 = ((-1, 0), (1, 0), (0, -1), (0, 1))


def make_slice(data, lung):
    return SliceImage(data=data, lung=lung)


def disk(shape, center, radius):
    yy, xx = np.indices(shape)
    return ((yy - center[0]) ** 2 + (xx - center[1]) ** 2 <= radius ** 2).astype(np.uint8)


def flat_map(values):
    """One-row difference map whose whole extent is lung."""
    values = np.asarray(values, dtype=np.float64)[None, :]
    return DifferenceMap(data=values, lung=np.ones(values.shape, dtype=np.uint8))


def brute_median(img, window):
    r = window // 2
    padded = np.pad(img, r, mode='edge')
    out = np.empty_like(img)
    for i in range(img.shape[0]):
        for j in range(img.shape[1]):
            out[i, j] = np.median(padded[i:i + window, j:j + window])
    return out


def brute_erode(m):
    h, w = m.shape
    out = np.zeros_like(m)
    for i in range(h):
        for j in range(w):
            out[i, j] = m[i, j] and all(
                m[i + di, j + dj] for di, dj in N4 if 0 <= i + di < h and 0 <= j + dj < w
            )
    return out


def brute_dilate(m):
    h, w = m.shape
    out = np.zeros_like(m)
    for i in range(h):
        for j in range(w):
            out[i, j] = m[i, j] or any(
                m[i + di, j + dj] for di, dj in N4 if 0 <= i + di < h and 0 <= j + dj < w
            )
    return out


def flood_fill_holes(m):
    h, w = m.shape
    reached = np.zeros((h, w), dtype=bool)
    queue = deque(
        (i, j) for i in range(h) for j in range(w)
        if (i in (0, h - 1) or j in (0, w - 1)) and not m[i, j]
    )
    for i, j in queue:
        reached[i, j] = True
    while queue:
        i, j = queue.popleft()
        for di, dj in N4:
            a, b = i + di, j + dj
            if 0 <= a < h and 0 <= b < w and not m[a, b] and not reached[a, b]:
                reached[a, b] = True
                queue.append((a, b))
    return (~reached).astype(np.uint8)


def best_split_mask(values):
    """Exhaustive search over contiguous two-way splits of the sorted values."""
    s = np.sort(values)
    best_cut, best_sse = None, np.inf
    for cut in range(1, len(s)):
        if s[cut] == s[cut - 1]:
            continue
        lo, hi = s[:cut], s[cut:]
        sse = ((lo - lo.mean()) ** 2).sum() + ((hi - hi.mean()) ** 2).sum()
        if sse < best_sse:
            best_cut, best_sse = cut, sse
    return values >= s[best_cut]


def best_otsu_mask(values, bins=256):
    """Per-bin inter-class variance computed directly from each candidate split."""
    edges = np.linspace(values.min(), values.max(), bins + 1)
    best_t, best_var = None, -np.inf
    for t in range(bins - 1):
        low = values < edges[t + 1]
        if low.all() or not low.any():
            continue
        var = low.sum() * (~low).sum() * (values[low].mean() - values[~low].mean()) ** 2
        if var > best_var:
            best_t, best_var = t, var
    return values >= edges[best_t + 1]


@pytest.fixture
def blob_pair():
    """32x32 slice pair: faint residual noise in the lung plus a +0.5 disk of radius 5."""
    rng = np.random.default_rng(3)
    lung = np.zeros((32, 32), dtype=np.uint8)
    lung[4:28, 4:28] = 1
    blob = disk((32, 32), (16, 16), 5) & lung
    synthetic = np.where(lung == 1, -0.5, 0.0)
    infected = np.where(lung == 1, synthetic + rng.uniform(0.02, 0.06, size=(32, 32)) + 0.5 * blob, 0.0)
    return make_slice(infected, lung), make_slice(synthetic, lung), blob


class TestSubtract:
    """Test the clamped difference map."""

    def test_identical_images(self):
        """Test identical slices give an all-zero map."""
        lung = np.ones((6, 6), dtype=np.uint8)
        img = make_slice(np.full((6, 6), 0.2), lung)
        assert not subtract(img, img).data.any()

    def test_positive_residual_on_blob(self):
        """Test a +0.3 blob shows up as 0.3 and nowhere else."""
        lung = np.ones((8, 8), dtype=np.uint8)
        blob = disk((8, 8), (4, 4), 2).astype(bool)
        base = np.full((8, 8), -0.4)
        diff = subtract(make_slice(np.where(blob, base + 0.3, base), lung), make_slice(base, lung))
        np.testing.assert_allclose(diff.data[blob], 0.3, atol=1e-6)
        assert not diff.data[~blob].any()

    def test_negative_residual_clamped(self):
        """Test synthetic pixels brighter than the infected ones clamp to 0."""
        lung = np.ones((4, 4), dtype=np.uint8)
        diff = subtract(make_slice(np.zeros((4, 4)), lung), make_slice(np.full((4, 4), 0.5), lung))
        assert not diff.data.any()

    def test_outside_lung_is_zero(self):
        """Test residuals outside the given lung are dropped."""
        lung = np.zeros((4, 4), dtype=np.uint8)
        lung[1:3, 1:3] = 1
        infected = make_slice(np.full((4, 4), 0.5), np.ones((4, 4)))
        synthetic = make_slice(np.zeros((4, 4)), np.ones((4, 4)))
        diff = subtract(infected, synthetic, lung)
        assert diff.data.sum() == pytest.approx(4 * 0.5)
        assert diff.lung_values().size == 4

    def test_shape_mismatch(self):
        """Test differing slice shapes are rejected."""
        a = make_slice(np.zeros((4, 4)), np.ones((4, 4)))
        b = make_slice(np.zeros((5, 5)), np.ones((5, 5)))
        with pytest.raises(ShapeMismatchError):
            subtract(a, b)


class TestFilters:
    """Test denoising, smoothing and morphology against brute-force oracles."""

    def test_median_constant(self):
        """Test a constant image is unchanged."""
        img = np.full((6, 6), 0.25)
        np.testing.assert_array_equal(median_filter(img, 5), img)

    def test_median_kills_impulse(self):
        """Test an isolated impulse disappears under a 3x3 median."""
        img = np.zeros((7, 7))
        img[3, 3] = 1.0
        assert not median_filter(img, 3).any()

    @pytest.mark.parametrize("seed", range(50))
    @pytest.mark.parametrize("window", [3, 5])
    def test_median_matches_oracle(self, window, seed):
        """Test against per-pixel sorting with replicated borders."""
        img = np.random.default_rng([window, seed]).random((7, 7))
        out = median_filter(img, window)
        np.testing.assert_array_equal(out, brute_median(img, window))
        assert set(out.ravel()) <= set(img.ravel())

    @pytest.mark.parametrize("window", [1, 2, 4])
    def test_median_invalid_window(self, window):
        """Test even or too small windows are rejected."""
        with pytest.raises(ValueError):
            median_filter(np.zeros((5, 5)), window)

    def test_gaussian_kernel(self):
        """Test normalization and the center weight of the 5x5 sigma-1 kernel."""
        k = gaussian_kernel(5, 1.0)
        assert k.sum() == pytest.approx(1.0)
        assert k[2, 2] == pytest.approx(0.1621, abs=1e-3)
        with pytest.raises(ValueError):
            gaussian_kernel(4, 1.0)

    def test_gaussian_smoothing(self):
        """Test plateaus survive, single pixels vanish and all-ones stays all-ones."""
        block = np.zeros((20, 20), dtype=np.uint8)
        block[4:16, 4:16] = 1
        out = gaussian_smooth_mask(block)
        np.testing.assert_array_equal(out[6:14, 6:14], 1)
        assert not out[:2].any()

        single = np.zeros((9, 9), dtype=np.uint8)
        single[4, 4] = 1
        assert not gaussian_smooth_mask(single).any()
        np.testing.assert_array_equal(gaussian_smooth_mask(np.ones((5, 5))), 1)

    def test_fill_ring(self):
        """Test a 5x5 ring becomes a solid block."""
        m = np.zeros((9, 9), dtype=np.uint8)
        m[2:7, 2:7] = 1
        m[3:6, 3:6] = 0
        expected = np.zeros((9, 9), dtype=np.uint8)
        expected[2:7, 2:7] = 1
        np.testing.assert_array_equal(fill_holes(m), expected)

    def test_diagonal_gap_is_a_hole(self):
        """Test holes are judged by 4-connectivity to the border."""
        m = np.array([
            [0, 1, 0],
            [1, 0, 1],
            [0, 1, 0],
        ], dtype=np.uint8)
        assert fill_holes(m)[1, 1] == 1

    @pytest.mark.parametrize("seed", range(50))
    def test_fill_holes_matches_flood_fill(self, seed):
        """Test random blobs against a breadth-first fill from the border."""
        m = (np.random.default_rng(seed).random((16, 16)) < 0.55).astype(np.uint8)
        np.testing.assert_array_equal(fill_holes(m), flood_fill_holes(m))

    def test_single_pixel_morphology(self):
        """Test erosion removes a lone pixel and dilation grows a 5-pixel cross."""
        m = np.zeros((5, 5), dtype=np.uint8)
        m[2, 2] = 1
        assert not erode(m).any()
        d = dilate(m)
        assert d.sum() == 5
        assert d[1, 2] and d[3, 2] and d[2, 1] and d[2, 3] and not d[1, 1]

    def test_border_conventions(self):
        """Test an all-ones mask survives erosion and an empty one stays empty."""
        np.testing.assert_array_equal(erode(np.ones((4, 4))), 1)
        assert not erode(np.zeros((4, 4))).any()
        assert not dilate(np.zeros((4, 4))).any()

    @pytest.mark.parametrize("seed", range(50))
    def test_morphology_matches_set_oracle(self, seed):
        """Test erosion/dilation against neighbor-set definitions and the opening/closing sandwich."""
        m = (np.random.default_rng(seed).random((16, 16)) < 0.6).astype(np.uint8)
        np.testing.assert_array_equal(erode(m), brute_erode(m))
        np.testing.assert_array_equal(dilate(m), brute_dilate(m))
        opened = dilate(erode(m))
        closed = erode(dilate(m))
        assert np.all(opened <= m) and np.all(m <= closed)

    def test_contour(self):
        """Test the outline of a 3x3 block is its 8-pixel ring."""
        m = np.zeros((5, 5), dtype=np.uint8)
        m[1:4, 1:4] = 1
        c = contour(m)
        assert c.sum() == 8 and c[2, 2] == 0


class TestBinarization:
    """Test the k-means and Otsu lesion/background split."""

    def test_kmeans_bimodal(self):
        """Test 100 pixels at 0.05 and 50 at 0.8 split exactly."""
        values = np.array([0.05] * 100 + [0.8] * 50)
        result = kmeans_binarize(flat_map(values), seed=1)
        np.testing.assert_array_equal(result.mask[0], values == 0.8)
        assert not result.flags

    @pytest.mark.parametrize("seed", range(50))
    def test_kmeans_matches_exhaustive_split(self, seed):
        """Test two-cluster k-means equals the best contiguous split of the sorted values."""
        rng = np.random.default_rng(seed)
        n = int(rng.integers(5, 200))
        values = np.concatenate([rng.normal(0.2, 0.08, n // 2), rng.normal(0.6, 0.15, n - n // 2)])
        values = np.clip(np.abs(values), 1e-3, None)
        result = kmeans_binarize(flat_map(values), seed=seed)
        np.testing.assert_array_equal(result.mask[0].astype(bool), best_split_mask(values))

    def test_kmeans_degenerate(self):
        """Test equal in-lung values give an empty, flagged mask."""
        result = kmeans_binarize(flat_map([0.4] * 10))
        assert not result.mask.any() and result.flags and result.threshold is None

    def test_kmeans_ignores_zeros(self):
        """Test zero pixels never join the lesion cluster nor count as a value."""
        result = kmeans_binarize(flat_map([0.0] * 50 + [0.3] * 5))
        assert not result.mask.any() and result.flags

    def test_kmeans_seeded(self):
        """Test identical seeds give identical thresholds."""
        values = np.random.default_rng(2).random(60) + 0.01
        a = kmeans_binarize(flat_map(values), seed=4)
        b = kmeans_binarize(flat_map(values), seed=4)
        assert a.threshold == b.threshold

    def test_otsu_two_peaks(self):
        """Test delta peaks at 0.1 and 0.9 are separated by a threshold strictly between them."""
        values = np.array([0.1] * 30 + [0.9] * 20)
        result = otsu_binarize(flat_map(values))
        assert 0.1 < result.threshold <= 0.9
        np.testing.assert_array_equal(result.mask[0], values == 0.9)

    @pytest.mark.parametrize("seed", range(50))
    def test_otsu_matches_exhaustive_bins(self, seed):
        """Test against direct per-bin inter-class variance."""
        values = np.random.default_rng(seed).gamma(2.0, 0.1, size=300) + 1e-3
        result = otsu_binarize(flat_map(values))
        np.testing.assert_array_equal(result.mask[0].astype(bool), best_otsu_mask(values))

    def test_otsu_single_value(self):
        """Test a single in-lung value gives an empty mask."""
        result = otsu_binarize(flat_map([0.2] * 12))
        assert not result.mask.any() and result.flags


class TestPipeline:
    """Test the full per-slice chain and volume assembly."""

    def test_identical_pair_gives_empty_mask(self):
        """Test a zero difference yields no lesion."""
        lung = np.ones((16, 16), dtype=np.uint8)
        img = make_slice(np.full((16, 16), -0.3), lung)
        seg = postprocess_pipeline(img, img)
        assert not seg.mask.any()
        assert seg.flags

    @pytest.mark.parametrize("method", ["kmeans", "otsu"])
    def test_blob_recovered(self, blob_pair, method):
        """Test a +0.5 disk over faint noise is recovered with DSC of at least 80%."""
        infected, synthetic, blob = blob_pair
        seg = postprocess_pipeline(infected, synthetic, method=method)
        assert seg.method == method
        assert dsc(seg.mask, blob) >= 80.0
        assert np.all(seg.mask <= infected.lung)

    def test_methods_agree_on_bimodal_data(self, blob_pair):
        """Test Otsu and k-means produce identical masks on well-separated data."""
        infected, synthetic, _ = blob_pair
        a = postprocess_pipeline(infected, synthetic, method="kmeans")
        b = postprocess_pipeline(infected, synthetic, method="otsu")
        np.testing.assert_array_equal(a.mask, b.mask)

    def test_mask_stays_in_lung(self, blob_pair):
        """Test a narrower lung clips the final mask."""
        infected, synthetic, _ = blob_pair
        lung = np.zeros((32, 32), dtype=np.uint8)
        lung[4:28, 4:16] = 1
        seg = postprocess_pipeline(infected, synthetic, lung=lung)
        assert seg.mask.any()
        assert not seg.mask[:, 16:].any()

    def test_deterministic(self, blob_pair):
        """Test repeated runs with the same seed give identical masks."""
        infected, synthetic, _ = blob_pair
        cfg = PostprocConfig(seed=9)
        a = postprocess_pipeline(infected, synthetic, cfg=cfg)
        b = postprocess_pipeline(infected, synthetic, cfg=cfg)
        np.testing.assert_array_equal(a.mask, b.mask)

    @pytest.mark.parametrize("method", ["kmeans", "otsu"])
    def test_phantom_cohort_with_paired_healthy(self, paired_phantom_cohort, method):
        """Test median DSC of at least 85 over ten phantoms using each lesion-free twin as the synthesis."""
        scores = []
        for case in paired_phantom_cohort:
            assert case.lesion_count >= 1
            infected = preprocess_volume(case.volume, case.lung, side=64, volume_id="p", label="infected")
            healthy = preprocess_volume(case.healthy, case.lung, side=64, volume_id="p", label="healthy")
            pred, _ = segment_volume(infected, healthy, case.lung, method=method)
            assert pred.data.shape == case.lesion.data.shape
            assert np.all(pred.data <= case.lung.data)
            scores.append(dsc(pred, case.lesion))
        assert len(scores) == 10
        assert np.median(scores) >= 85.0, scores

    def test_residual_noise_below_floor_is_not_lesion(self):
        """Test a lesion-free slice with faint residual noise gives an empty mask."""
        rng = np.random.default_rng(11)
        lung = np.ones((24, 24), dtype=np.uint8)
        synthetic = np.full((24, 24), -0.6)
        infected = synthetic + rng.uniform(0.0, 0.08, size=(24, 24))
        cfg = PostprocConfig(min_difference=0.1)
        for method in ("kmeans", "otsu"):
            seg = postprocess_pipeline(make_slice(infected, lung), make_slice(synthetic, lung),
                                       method=method, cfg=cfg)
            assert not seg.mask.any(), method
            assert seg.threshold == pytest.approx(0.1)

    def test_floor_disabled_splits_noise(self):
        """Test without a floor the same noise is split into a nonempty lesion cluster."""
        rng = np.random.default_rng(11)
        lung = np.ones((24, 24), dtype=np.uint8)
        synthetic = np.full((24, 24), -0.6)
        # smooth ramp so the upper cluster is one connected region
        ramp = np.linspace(0.0, 0.08, 24)[None, :].repeat(24, axis=0)
        infected = synthetic + ramp + rng.uniform(0.0, 0.002, size=(24, 24))
        seg = postprocess_pipeline(make_slice(infected, lung), make_slice(synthetic, lung),
                                   method="kmeans", cfg=PostprocConfig(min_difference=0.0))
        assert seg.mask.any()
        assert seg.threshold < 0.1

    def test_floor_keeps_strong_blob(self, blob_pair):
        """Test a floor above the noise but below the lesion leaves the blob intact."""
        infected, synthetic, blob = blob_pair
        floored = postprocess_pipeline(infected, synthetic, cfg=PostprocConfig(min_difference=0.2))
        unfloored = postprocess_pipeline(infected, synthetic, cfg=PostprocConfig(min_difference=0.0))
        np.testing.assert_array_equal(floored.mask, unfloored.mask)
        assert dsc(floored.mask, blob) >= 80.0

    def test_segment_volume_mismatch(self, small_phantom):
        """Test unequal slice lists are rejected."""
        slices = preprocess_volume(small_phantom.volume, small_phantom.lung, side=32)
        with pytest.raises(ShapeMismatchError):
            segment_volume(slices, slices[:-1], small_phantom.lung)


class TestOverlays:
    """Test the prediction/ground-truth renders."""

    def test_confusion_colors(self):
        """Test TP, FN and FP pixels blend toward their colors over a black image."""
        image = np.full((2, 2), -1.0)
        pred = np.array([[1, 0], [1, 0]], dtype=np.uint8)
        truth = np.array([[1, 1], [0, 0]], dtype=np.uint8)
        rgb = confusion_overlay(image, pred, truth)
        assert tuple(rgb[0, 0]) == (0, 100, 0)
        assert tuple(rgb[0, 1]) == (110, 0, 0)
        assert tuple(rgb[1, 0]) == (0, 40, 128)
        assert tuple(rgb[1, 1]) == (0, 0, 0)

    def test_contour_colors(self):
        """Test shared outlines are yellow and the interior keeps the gray image."""
        image = np.zeros((5, 5))
        m = np.zeros((5, 5), dtype=np.uint8)
        m[1:4, 1:4] = 1
        rgb = contour_overlay(image, m, m)
        assert tuple(rgb[1, 1]) == (255, 255, 0)
        assert tuple(rgb[2, 2]) == (128, 128, 128)

    def test_write_png(self, temp_dir):
        """Test the overlay is written as an RGB PNG."""
        path = write_confusion_overlay_png(
            np.zeros((4, 4)), np.eye(4, dtype=np.uint8), np.eye(4, dtype=np.uint8), temp_dir / "o.png"
        )
        with Image.open(path) as im:
            assert im.mode == "RGB" and im.size == (4, 4)

    def test_shape_mismatch(self):
        """Test masks must match the image."""
        with pytest.raises(ShapeMismatchError):
            confusion_overlay(np.zeros((4, 4)), np.zeros((3, 3)), np.zeros((4, 4)))
