"""Patch discriminator and its receptive-field arithmetic."""

import logging
from typing import List, Tuple

from ..autodiff import Tensor, conv_output_size, leaky_relu
from ..shared.schemas import DiscriminatorConfig
from .layers import Conv2d, InstanceNorm, Network

logger = logging.getLogger(__name__)


def receptive_field(cfg: DiscriminatorConfig) -> int:
    """rf <- rf + (k - 1) * jump; jump <- jump * stride, over layers in order."""
    rf, jump = 1, 1
    for stride in cfg.strides:
        rf += (cfg.kernel - 1) * jump
        jump *= stride
    return rf


def receptive_field_bounds(cfg: DiscriminatorConfig, position: int) -> Tuple[int, int]:
    """Half-open input span [start, stop) seen by output unit ``position`` along one axis.

    Coordinates are unclipped: a start below 0 or a stop past the input side
    means part of the field lies on zero padding.
    """
    jump, offset = 1, 0
    for stride in cfg.strides:
        offset += cfg.padding * jump
        jump *= stride
    start = position * jump - offset
    return start, start + receptive_field(cfg)


def output_side(cfg: DiscriminatorConfig, side: int) -> int:
    for stride in cfg.strides:
        side = conv_output_size(side, cfg.kernel, stride, cfg.padding)
    return side


class Discriminator(Network):
    """Conv stack with LeakyReLU after every layer but the last and selective instance norm.

    The output is a raw single-channel score map, one score per input patch.
    """

    def __init__(self, cfg: DiscriminatorConfig):
        super().__init__()
        self.cfg = cfg
        prev = cfg.in_channels
        for i, (stride, ch) in enumerate(zip(cfg.strides, cfg.channels), start=1):
            self.add(f"layer{i}.conv", Conv2d(prev, ch, cfg.kernel, stride, cfg.padding))
            if i in cfg.norm_layers:
                self.add(f"layer{i}.norm", InstanceNorm(ch))
            prev = ch

    def feature_sides(self, side: int) -> List[int]:
        """Spatial side after each layer for a side x side input."""
        sides = []
        for stride in self.cfg.strides:
            side = conv_output_size(side, self.cfg.kernel, stride, self.cfg.padding)
            sides.append(side)
        return sides

    def forward(self, x: Tensor) -> Tensor:
        h = x
        n_layers = self.cfg.layers
        for i in range(1, n_layers + 1):
            h = self.layers[f"layer{i}.conv"](h)
            if f"layer{i}.norm" in self.layers:
                h = self.layers[f"layer{i}.norm"](h)
            if i < n_layers:
                h = leaky_relu(h, self.cfg.leaky_slope)
        return h


def build_discriminator(cfg: DiscriminatorConfig) -> Discriminator:
    net = Discriminator(cfg)
    logger.debug(
        f"Built discriminator: {cfg.layers} layers, receptive field {receptive_field(cfg)}, "
        f"{net.parameter_count()} parameters"
    )
    return net
