"""Bias-corrected Adam and the linear-decay learning-rate schedule."""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from ..autodiff import Tensor
from ..shared.errors import NonFiniteError
from ..shared.schemas import TrainConfig

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    """First/second moments per parameter and the step counter."""
    m: List[np.ndarray]
    v: List[np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params: Sequence[Tensor]) -> "AdamState":
        return cls(
            m=[np.zeros_like(p.data) for p in params],
            v=[np.zeros_like(p.data) for p in params],
        )


def adam_step(
    params: Sequence[Tensor],
    grads: Sequence[Optional[np.ndarray]],
    state: AdamState,
    lr: float,
    beta1: float = 0.5,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> AdamState:
    """One in-place Adam update; parameters without a gradient are left untouched."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError(
            f"adam_step: {len(params)} params, {len(grads)} grads, {len(state.m)} moment slots"
        )
    for i, g in enumerate(grads):
        if g is None:
            continue
        if g.shape != params[i].shape:
            raise ValueError(f"adam_step: grad {g.shape} does not match parameter {params[i].shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"non-finite gradient for parameter #{i} of shape {g.shape}")

    state.t += 1
    t = state.t
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    for i, (p, g) in enumerate(zip(params, grads)):
        if g is None:
            continue
        dtype = p.data.dtype.type
        state.m[i] = dtype(beta1) * state.m[i] + dtype(1.0 - beta1) * g
        state.v[i] = dtype(beta2) * state.v[i] + dtype(1.0 - beta2) * (g * g)
        m_hat = state.m[i] / dtype(bc1)
        v_hat = state.v[i] / dtype(bc2)
        p.data = p.data - dtype(lr) * m_hat / (np.sqrt(v_hat) + dtype(eps))
    return state


class Adam:
    """Adam over a fixed parameter list, with the learning rate supplied per step."""

    def __init__(
        self,
        params: Sequence[Tensor],
        beta1: float = 0.5,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params = list(params)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.state = AdamState.zeros_like(self.params)

    @classmethod
    def from_config(cls, params: Sequence[Tensor], cfg: TrainConfig) -> "Adam":
        return cls(params, beta1=cfg.adam_beta1, beta2=cfg.adam_beta2, eps=cfg.adam_eps)

    def step(self, lr: float) -> None:
        adam_step(
            self.params,
            [p.grad for p in self.params],
            self.state,
            lr,
            self.beta1,
            self.beta2,
            self.eps,
        )

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


def lr_schedule(epoch: int, cfg: TrainConfig) -> float:
    """lr0 up to decay_start_epoch, then linear decay reaching 0 at the last epoch."""
    if not 1 <= epoch <= cfg.epochs:
        raise ValueError(f"epoch {epoch} outside 1..{cfg.epochs}")
    if epoch <= cfg.decay_start_epoch:
        return cfg.lr0
    ratio = (cfg.epochs - epoch) / (cfg.epochs - cfg.decay_start_epoch)
    return cfg.lr0 * ratio
