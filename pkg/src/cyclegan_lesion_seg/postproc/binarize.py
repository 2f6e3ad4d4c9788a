"""Lesion/background split of a difference map: 1-D k-means or Otsu thresholding.

Both methods look only at in-lung nonzero values and reduce to a single
threshold: lesion = values >= threshold.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .difference import DifferenceMap

logger = logging.getLogger(__name__)

OTSU_BINS = 256


@dataclass
class Binarization:
    mask: np.ndarray
    threshold: Optional[float] = None
    flags: List[str] = field(default_factory=list)


def _degenerate(diff: DifferenceMap, reason: str) -> Binarization:
    logger.warning(f"Binarization degenerate: {reason}; returning an empty mask")
    return Binarization(mask=np.zeros(diff.data.shape, dtype=np.uint8), flags=[reason])


def _apply_threshold(diff: DifferenceMap, threshold: float) -> np.ndarray:
    return ((diff.lung == 1) & (diff.data > 0) & (diff.data >= threshold)).astype(np.uint8)


# ---------------------------------------------------------------------------
# k-means
# ---------------------------------------------------------------------------

def _kmeans_pp_init(values: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centers = [values[rng.integers(0, len(values))]]
    for _ in range(1, k):
        d2 = np.min((values[:, None] - np.asarray(centers)[None, :]) ** 2, axis=1)
        total = d2.sum()
        if total == 0:
            centers.append(values[rng.integers(0, len(values))])
        else:
            centers.append(values[rng.choice(len(values), p=d2 / total)])
    return np.asarray(centers, dtype=np.float64)


def lloyd_1d(
    values: np.ndarray, k: int, rng: np.random.Generator, max_iter: int = 100
) -> Tuple[np.ndarray, np.ndarray, float]:
    """One Lloyd run from a k-means++ start: (labels, centers, within-cluster SSE)."""
    centers = _kmeans_pp_init(values, k, rng)
    labels = np.full(len(values), -1)
    for _ in range(max_iter):
        new_labels = np.argmin(np.abs(values[:, None] - centers[None, :]), axis=1)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            members = values[labels == j]
            if members.size:
                centers[j] = members.mean()
    sse = float(((values - centers[labels]) ** 2).sum())
    return labels, centers, sse


def split_sse(sorted_values: np.ndarray) -> np.ndarray:
    """Within-cluster SSE of every contiguous two-way split; entry i puts values[:i+1] low."""
    v = sorted_values - sorted_values.mean()
    n = len(v)
    c1, c2 = np.cumsum(v), np.cumsum(v * v)
    n_lo = np.arange(1, n, dtype=np.float64)
    n_hi = n - n_lo
    s_lo, q_lo = c1[:-1], c2[:-1]
    s_hi, q_hi = c1[-1] - s_lo, c2[-1] - q_lo
    return (q_lo - s_lo ** 2 / n_lo) + (q_hi - s_hi ** 2 / n_hi)


def best_contiguous_split(sorted_values: np.ndarray) -> Tuple[int, float]:
    """(cut, sse) of the optimal split between distinct neighbors; ties go to the lowest cut.

    ``cut`` is the index of the first high value.
    """
    sse = split_sse(sorted_values)
    valid = sorted_values[1:] > sorted_values[:-1]
    sse = np.where(valid, sse, np.inf)
    i = int(np.argmin(sse))
    return i + 1, float(sse[i])


def kmeans_binarize(
    diff: DifferenceMap, k: int = 2, restarts: int = 5, seed: int = 0, max_iter: int = 100
) -> Binarization:
    """Lesion = in-lung pixels of the cluster with the highest centroid.

    Best of ``restarts`` seeded Lloyd runs by SSE; for k = 2 the result is
    checked against the exact contiguous split of the sorted values.
    """
    if k < 2 or restarts < 1:
        raise ValueError(f"kmeans needs k >= 2 and restarts >= 1, got k={k}, restarts={restarts}")
    values = diff.lung_values()
    if np.unique(values).size < k:
        return _degenerate(diff, f"fewer than {k} distinct in-lung values")

    best: Optional[Tuple[float, np.ndarray, np.ndarray]] = None
    for r in range(restarts):
        labels, centers, sse = lloyd_1d(values, k, np.random.default_rng([seed, r]), max_iter)
        if best is None or sse < best[0]:
            best = (sse, labels, centers)
    _, labels, centers = best
    top = int(np.argmax(centers))
    threshold = float(values[labels == top].min())

    if k == 2:
        sorted_values = np.sort(values)
        lloyd_cut = int(np.searchsorted(sorted_values, threshold, side='left'))
        sse_all = split_sse(sorted_values)
        exact_cut, exact_sse = best_contiguous_split(sorted_values)
        lloyd_sse = float(sse_all[lloyd_cut - 1]) if 0 < lloyd_cut < len(values) else np.inf
        if exact_sse < lloyd_sse or (exact_sse == lloyd_sse and exact_cut < lloyd_cut):
            threshold = float(sorted_values[exact_cut])

    logger.debug(f"k-means threshold {threshold:.4f} over {values.size} in-lung values")
    return Binarization(mask=_apply_threshold(diff, threshold), threshold=threshold)


# ---------------------------------------------------------------------------
# Otsu
# ---------------------------------------------------------------------------

def otsu_histogram(values: np.ndarray, bins: int = OTSU_BINS) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(edges, counts, sums) of equal-width bins over [min, max]; sums are of the actual values."""
    edges = np.linspace(values.min(), values.max(), bins + 1)
    idx = np.searchsorted(edges[1:-1], values, side='right')
    counts = np.bincount(idx, minlength=bins).astype(np.float64)
    sums = np.bincount(idx, weights=values, minlength=bins)
    return edges, counts, sums


def between_class_variance(counts: np.ndarray, sums: np.ndarray) -> np.ndarray:
    """Unnormalized w0 * w1 * (mu0 - mu1)^2 for a split after every bin but the last."""
    w0 = np.cumsum(counts)[:-1]
    s0 = np.cumsum(sums)[:-1]
    w1 = counts.sum() - w0
    s1 = sums.sum() - s0
    with np.errstate(divide='ignore', invalid='ignore'):
        var = w0 * w1 * (s0 / w0 - s1 / w1) ** 2
    return np.where((w0 > 0) & (w1 > 0), var, -np.inf)


def otsu_binarize(diff: DifferenceMap, bins: int = OTSU_BINS) -> Binarization:
    """Threshold maximizing inter-class variance over a histogram of in-lung nonzero values."""
    values = diff.lung_values()
    if np.unique(values).size < 2:
        return _degenerate(diff, "fewer than 2 distinct in-lung values")
    edges, counts, sums = otsu_histogram(values, bins)
    t = int(np.argmax(between_class_variance(counts, sums)))
    threshold = float(edges[t + 1])
    logger.debug(f"Otsu threshold {threshold:.4f} (bin {t}) over {values.size} in-lung values")
    return Binarization(mask=_apply_threshold(diff, threshold), threshold=threshold)
