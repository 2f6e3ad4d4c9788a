"""Least-squares adversarial, cycle and identity losses of the two-generator objective.

Domain X holds infected slices and domain Y healthy ones: G_XY removes lesions,
G_YX adds them, D_X scores infected slices and D_Y healthy ones.
"""

from typing import Callable, NamedTuple, Optional, Union

import numpy as np

from ..autodiff import Tensor, l1_loss, mse_loss
from ..shared.errors import ShapeMismatchError
from ..shared.schemas import LossWeights

ImageMap = Callable[[Tensor], Tensor]


def _full_like(t: Tensor, value: float) -> Tensor:
    return Tensor(np.full(t.shape, value, dtype=t.dtype))


def lsgan_d_loss(D: ImageMap, real: Tensor, fake: Tensor) -> Tensor:
    """mean((D(real) - 1)^2) + mean(D(fake)^2); ``fake`` is detached here."""
    d_real = D(real)
    d_fake = D(fake.detach())
    if d_real.shape != d_fake.shape:
        raise ShapeMismatchError(f"discriminator maps differ: {d_real.shape} vs {d_fake.shape}")
    return mse_loss(d_real, _full_like(d_real, 1.0)) + mse_loss(d_fake, _full_like(d_fake, 0.0))


def lsgan_g_loss(D: ImageMap, fake: Tensor) -> Tensor:
    """mean((D(fake) - 1)^2), with gradient flowing back into the generator."""
    d_fake = D(fake)
    return mse_loss(d_fake, _full_like(d_fake, 1.0))


def cycle_loss(
    G_XY: ImageMap,
    G_YX: ImageMap,
    x: Tensor,
    y: Tensor,
    fake_y: Optional[Tensor] = None,
    fake_x: Optional[Tensor] = None,
) -> Tensor:
    """l1(G_YX(G_XY(x)), x) + l1(G_XY(G_YX(y)), y); forward translations may be passed in."""
    fake_y = G_XY(x) if fake_y is None else fake_y
    fake_x = G_YX(y) if fake_x is None else fake_x
    return l1_loss(G_YX(fake_y), x) + l1_loss(G_XY(fake_x), y)


def identity_loss(G_XY: ImageMap, G_YX: ImageMap, x: Tensor, y: Tensor) -> Tensor:
    """l1(G_XY(y), y) + l1(G_YX(x), x)."""
    return l1_loss(G_XY(y), y) + l1_loss(G_YX(x), x)


Scalar = Union[Tensor, float]


def combine_generator_losses(
    adv_xy: Scalar, adv_yx: Scalar, cycle: Scalar, identity: Scalar, weights: LossWeights
) -> Scalar:
    """adv_xy + adv_yx + lambda_cycle * cycle + lambda_identity * identity."""
    return adv_xy + adv_yx + cycle * weights.lambda_cycle + identity * weights.lambda_identity


class GeneratorLosses(NamedTuple):
    total: Tensor
    adv_xy: Tensor
    adv_yx: Tensor
    cycle: Tensor
    identity: Tensor
    fake_y: Tensor
    fake_x: Tensor


def total_generator_loss(
    G_XY: ImageMap,
    G_YX: ImageMap,
    D_X: ImageMap,
    D_Y: ImageMap,
    x: Tensor,
    y: Tensor,
    weights: LossWeights,
) -> GeneratorLosses:
    """Full generator objective; the fakes are returned for the discriminator updates."""
    fake_y = G_XY(x)
    fake_x = G_YX(y)
    adv_xy = lsgan_g_loss(D_Y, fake_y)
    adv_yx = lsgan_g_loss(D_X, fake_x)
    cyc = cycle_loss(G_XY, G_YX, x, y, fake_y=fake_y, fake_x=fake_x)
    idt = identity_loss(G_XY, G_YX, x, y)
    total = combine_generator_losses(adv_xy, adv_yx, cyc, idt, weights)
    return GeneratorLosses(total, adv_xy, adv_yx, cyc, idt, fake_y, fake_x)
