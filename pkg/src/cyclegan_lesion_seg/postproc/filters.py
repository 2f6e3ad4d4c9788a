"""Denoising, smoothing and binary morphology on 2-D slices."""

import numpy as np
from scipy import ndimage

# radius-1 disk: the 4-neighborhood cross
CROSS = ndimage.generate_binary_structure(2, 1)


def _as_bool(mask: np.ndarray) -> np.ndarray:
    return np.asarray(mask).astype(bool)


def median_filter(img: np.ndarray, window: int = 5) -> np.ndarray:
    """Median over a window x window neighborhood with replicated borders."""
    if window < 3 or window % 2 == 0:
        raise ValueError(f"median window must be odd and >= 3, got {window}")
    return ndimage.median_filter(np.asarray(img), size=window, mode='nearest')


def gaussian_kernel(size: int = 5, sigma: float = 1.0) -> np.ndarray:
    """Normalized size x size Gaussian."""
    if size < 1 or size % 2 == 0:
        raise ValueError(f"kernel size must be odd and positive, got {size}")
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    r = np.arange(size, dtype=np.float64) - size // 2
    g = np.exp(-(r ** 2) / (2.0 * sigma ** 2))
    kernel = np.outer(g, g)
    return kernel / kernel.sum()


def gaussian_smooth_mask(
    mask: np.ndarray, size: int = 5, sigma: float = 1.0, threshold: float = 0.5
) -> np.ndarray:
    """Blur a {0,1} mask with a normalized Gaussian and re-binarize at ``threshold``."""
    blurred = ndimage.convolve(
        _as_bool(mask).astype(np.float64), gaussian_kernel(size, sigma), mode='nearest'
    )
    return (blurred >= threshold).astype(np.uint8)


def fill_holes(mask: np.ndarray) -> np.ndarray:
    """Set background components not 4-connected to the border."""
    return ndimage.binary_fill_holes(_as_bool(mask), structure=CROSS).astype(np.uint8)


def erode(mask: np.ndarray) -> np.ndarray:
    """Radius-1 erosion; pixels beyond the image count as foreground."""
    m = _as_bool(mask)
    if not m.any():
        return np.zeros(m.shape, dtype=np.uint8)
    return ndimage.binary_erosion(m, structure=CROSS, border_value=1).astype(np.uint8)


def dilate(mask: np.ndarray) -> np.ndarray:
    """Radius-1 dilation; pixels beyond the image count as background."""
    return ndimage.binary_dilation(_as_bool(mask), structure=CROSS, border_value=0).astype(np.uint8)


def contour(mask: np.ndarray) -> np.ndarray:
    """Foreground pixels with at least one 4-neighbor in the background."""
    m = _as_bool(mask)
    inner = ndimage.binary_erosion(m, structure=CROSS, border_value=0)
    return (m & ~inner).astype(np.uint8)
