"""Finite-difference verification of tape gradients."""

import logging
from typing import Callable

import numpy as np

from .tensor import Tape, Tensor

logger = logging.getLogger(__name__)


def numeric_gradient(f: Callable[[Tensor], Tensor], x: Tensor, h: float = 1e-4) -> np.ndarray:
    """Central differences of a scalar function, one coordinate at a time."""
    point = Tensor(np.array(x.data, dtype=np.float64))
    flat = point.data.reshape(-1)
    grad = np.empty(flat.size, dtype=np.float64)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        f_plus = f(point).item()
        flat[i] = orig - h
        f_minus = f(point).item()
        flat[i] = orig
        grad[i] = (f_plus - f_minus) / (2.0 * h)
    return grad.reshape(x.shape)


def analytic_gradient(f: Callable[[Tensor], Tensor], x: Tensor) -> np.ndarray:
    """Gradient of ``f`` at ``x`` obtained from one backward pass in double precision."""
    leaf = Tensor(np.array(x.data, dtype=np.float64), requires_grad=True)
    with Tape() as tape:
        loss = f(leaf)
    tape.backward(loss)
    if leaf.grad is None:
        return np.zeros(x.shape, dtype=np.float64)
    return leaf.grad


def gradcheck(f: Callable[[Tensor], Tensor], x: Tensor, h: float = 1e-4) -> float:
    """Max over coordinates of |analytic - numeric| / max(1e-8, |numeric|).

    ``f`` must map a tensor shaped like ``x`` to a scalar tensor, and every
    parameter it closes over should already be float64.
    """
    analytic = analytic_gradient(f, x)
    numeric = numeric_gradient(f, x, h)
    err = np.abs(analytic - numeric) / np.maximum(1e-8, np.abs(numeric))
    worst = float(err.max()) if err.size else 0.0
    logger.debug(f"gradcheck over {x.data.size} coordinates: max relative error {worst:.3e}")
    return worst
