"""History buffer of generated images for discriminator updates."""

from typing import List

import numpy as np


class ImagePool:
    """Stores previously generated images.

    While the buffer is filling, every query image is stored and returned.
    Once full, each image is returned as-is with probability 1/2; otherwise a
    random stored image is returned and replaced by the new one. A size of 0
    disables the buffer. Draws come from the caller's generator so the
    sequence is reproducible.
    """

    def __init__(self, pool_size: int):
        self.pool_size = pool_size
        self.images: List[np.ndarray] = []

    def query(self, images: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        if self.pool_size == 0:
            return images
        out = []
        for image in images:
            if len(self.images) < self.pool_size:
                self.images.append(image.copy())
                out.append(image)
            elif rng.random() > 0.5:
                idx = int(rng.integers(0, self.pool_size))
                out.append(self.images[idx].copy())
                self.images[idx] = image.copy()
            else:
                out.append(image)
        return np.stack(out)

    def as_array(self) -> np.ndarray:
        """Stored images stacked along a leading axis (empty pool: zero-length array)."""
        if not self.images:
            return np.zeros((0,), dtype=np.float32)
        return np.stack(self.images)

    def load(self, images: np.ndarray) -> None:
        self.images = [img.copy() for img in images] if images.size else []
