"""Seeded synthetic chest CT: body, two lungs, vessels and soft-edged lesions."""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy import ndimage

from ..imgvol import BinaryMask, CtVolume
from ..shared.schemas import PhantomSpec

logger = logging.getLogger(__name__)

BODY_SEMI_AXES = (0.46, 0.40, 0.48)
LUNG_SEMI_AXES = (0.15, 0.26, 0.36)
LUNG_OFFSET_X = 0.19
LESION_ASPECT = (0.75, 1.0)
LESION_EXPONENT = (2.0, 3.0)
LESION_TEXTURE = 0.1


@dataclass
class PhantomCase:
    """Infected phantom with its ground truth; ``healthy`` is the same body without lesions."""
    volume: CtVolume
    lung: BinaryMask
    lesion: BinaryMask
    healthy: CtVolume
    lesion_count: int
    flags: List[str] = field(default_factory=list)


def _grid(n: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Broadcastable (z, y, x) voxel-center coordinates."""
    r = np.arange(n, dtype=np.float64)
    return r[:, None, None], r[None, :, None], r[None, None, :]


def _ellipsoid(n: int, center_xyz, semi_xyz) -> np.ndarray:
    z, y, x = _grid(n)
    cx, cy, cz = center_xyz
    ax, ay, az = semi_xyz
    return ((x - cx) / ax) ** 2 + ((y - cy) / ay) ** 2 + ((z - cz) / az) ** 2 <= 1.0


def _texture(rng: np.random.Generator, n: int, sigma: float) -> np.ndarray:
    """Smooth noise squashed into (0, 1)."""
    u = ndimage.gaussian_filter(rng.standard_normal((n, n, n)), sigma=sigma, mode='reflect')
    std = u.std()
    if std > 0:
        u = u / std
    return 0.5 * (1.0 + np.tanh(u))


def _in_range(t: np.ndarray, lo_hi: Tuple[float, float]) -> np.ndarray:
    lo, hi = lo_hi
    return lo + t * (hi - lo)


def _segment_tube(n: int, p0: np.ndarray, p1: np.ndarray, radius: float) -> np.ndarray:
    """Voxels within ``radius`` of the segment p0-p1, points given as (z, y, x)."""
    z, y, x = _grid(n)
    pts = np.stack(np.broadcast_arrays(z, y, x), axis=-1)
    d = p1 - p0
    length2 = float(d @ d)
    if length2 == 0:
        t = np.zeros(pts.shape[:-1])
    else:
        t = np.clip(((pts - p0) @ d) / length2, 0.0, 1.0)
    closest = p0 + t[..., None] * d
    return np.sum((pts - closest) ** 2, axis=-1) <= radius ** 2


def lung_layout(n: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(body, left lung, right lung) boolean fields of an n^3 phantom."""
    c = (n - 1) / 2.0
    body = _ellipsoid(n, (c, c, c), tuple(a * n for a in BODY_SEMI_AXES))
    semi = tuple(a * n for a in LUNG_SEMI_AXES)
    left = _ellipsoid(n, (c - LUNG_OFFSET_X * n, c, c), semi)
    right = _ellipsoid(n, (c + LUNG_OFFSET_X * n, c, c), semi)
    return body, left, right


def gen_healthy(spec: PhantomSpec) -> Tuple[CtVolume, BinaryMask]:
    """Body ellipsoid with two lungs, textured noise and a few bright vessel segments."""
    n = spec.size
    rng = np.random.default_rng(spec.seed)
    body, left, right = lung_layout(n)
    lung = left | right

    hu = np.full((n, n, n), spec.air_hu, dtype=np.float64)
    hu[body] = _in_range(_texture(rng, n, spec.noise_smoothing), spec.body_hu)[body]
    hu[lung] = _in_range(_texture(rng, n, spec.noise_smoothing), spec.lung_hu)[lung]

    n_vessels = int(round(spec.vessel_density * int(lung.sum())))
    for k in range(n_vessels):
        part = (left, right)[k % 2]
        idx = np.argwhere(part)
        p0, p1 = idx[rng.integers(0, len(idx), size=2)].astype(np.float64)
        tube = _segment_tube(n, p0, p1, spec.vessel_radius) & part
        hu[tube] = spec.vessel_hu
    logger.debug(f"Healthy phantom seed={spec.seed}: {int(lung.sum())} lung voxels, {n_vessels} vessels")
    return CtVolume(data=hu.astype(np.float32)), BinaryMask(data=lung)


def lesion_weight(
    n: int, center: np.ndarray, semi: np.ndarray, exponent: float, soft_edge: float
) -> np.ndarray:
    """1 inside the superellipsoid, a linear ramp to 0 over ``soft_edge`` voxels outside it."""
    z, y, x = _grid(n)
    cz, cy, cx = center
    az, ay, ax = semi
    rho = (
        np.abs((x - cx) / ax) ** exponent
        + np.abs((y - cy) / ay) ** exponent
        + np.abs((z - cz) / az) ** exponent
    ) ** (1.0 / exponent)
    ramp = 1.0 - (rho - 1.0) * semi.min() / soft_edge
    return np.where(rho <= 1.0, 1.0, np.clip(ramp, 0.0, 1.0))


def _place_lesion(
    spec: PhantomSpec, lung: np.ndarray, rng: np.random.Generator
) -> Optional[Tuple[np.ndarray, float]]:
    """Weight field of one lesion whose whole support lies in the lung, or None."""
    n = spec.size
    candidates = np.argwhere(lung)
    for _ in range(spec.max_placement_retries):
        center = candidates[rng.integers(0, len(candidates))].astype(np.float64)
        radius = rng.uniform(*spec.lesion_radius)
        semi = radius * rng.uniform(*LESION_ASPECT, size=3)
        exponent = rng.uniform(*LESION_EXPONENT)
        value = rng.uniform(*spec.lesion_hu)
        reach = semi * (1.0 + spec.soft_edge / semi.min())
        if np.any(center - reach < 0) or np.any(center + reach > n - 1):
            continue
        w = lesion_weight(n, center, semi, exponent, spec.soft_edge)
        if np.all(lung[w > 0]):
            return w, value
    return None


def gen_infected(spec: PhantomSpec) -> PhantomCase:
    """gen_healthy plus lesions blended in with soft edges; the paired healthy volume is kept."""
    healthy, lung = gen_healthy(spec)
    rng = np.random.default_rng([spec.seed, 1])
    n = spec.size
    lo, hi = spec.lesion_count
    wanted = int(rng.integers(lo, hi + 1))

    weight = np.zeros((n, n, n))
    value = np.zeros((n, n, n))
    flags = []
    placed = 0
    for i in range(wanted):
        result = _place_lesion(spec, lung.as_bool(), rng)
        if result is None:
            flags.append(f"lesion {i} not placed after {spec.max_placement_retries} retries")
            continue
        w, v = result
        stronger = w > weight
        weight = np.where(stronger, w, weight)
        value = np.where(stronger, v, value)
        placed += 1
    if flags:
        logger.warning(f"Phantom seed={spec.seed}: placed {placed}/{wanted} lesions")

    texture = 2.0 * _texture(rng, n, spec.noise_smoothing) - 1.0
    lesion_hu = np.clip(
        value + LESION_TEXTURE * (spec.lesion_hu[1] - spec.lesion_hu[0]) * texture, *spec.lesion_hu
    )
    base = healthy.data.astype(np.float64)
    blended = np.where(weight > 0, (1.0 - weight) * base + weight * lesion_hu, base)
    return PhantomCase(
        volume=CtVolume(data=blended.astype(np.float32)),
        lung=lung,
        lesion=BinaryMask(data=weight >= 1.0),
        healthy=healthy,
        lesion_count=placed,
        flags=flags,
    )
