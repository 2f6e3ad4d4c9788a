"""U-net generator: stride-2 encoder, upsampling decoder with skips at every stage."""

import logging
from typing import List

import numpy as np

from ..autodiff import Tensor, atanh, concat_channels, leaky_relu, relu, tanh
from ..shared.errors import ShapeMismatchError
from ..shared.schemas import GeneratorConfig
from .layers import Conv2d, InstanceNorm, Network, UpConv2d, init_weights

logger = logging.getLogger(__name__)

RESIDUAL_CLIP = 0.999


class Generator(Network):
    """Maps an N x C_in x side x side image in [-1, 1] to one of the same size.

    Encoder stage s: 3x3 conv stride 2 -> instance norm -> LeakyReLU, with
    min(base * 2**s, max) channels. The innermost stage is 1x1 and carries no
    norm. Decoder stage s: upsample + 3x3 conv -> instance norm -> ReLU, then
    concatenation with encoder output s - 1. The output layer is an upsample
    conv followed by tanh. With ``residual_output`` the conv output is added
    to atanh of the input before the tanh, so a zero correction returns the
    input itself (within the atanh clip).
    """

    def __init__(self, cfg: GeneratorConfig):
        super().__init__()
        self.cfg = cfg
        ch = cfg.channels
        stages = cfg.stages

        prev = cfg.in_channels
        for s in range(stages):
            self.add(f"enc{s}.conv", Conv2d(prev, ch[s], kernel=cfg.kernel, stride=2, padding=1))
            if s < stages - 1:
                self.add(f"enc{s}.norm", InstanceNorm(ch[s]))
            prev = ch[s]

        for s in range(stages - 1, 0, -1):
            self.add(f"dec{s}.conv", UpConv2d(prev, ch[s - 1]))
            self.add(f"dec{s}.norm", InstanceNorm(ch[s - 1]))
            prev = 2 * ch[s - 1]
        self.add("out.conv", UpConv2d(prev, cfg.out_channels))

    def encoder_sides(self) -> List[int]:
        """Feature-map side after each encoder stage."""
        return [self.cfg.input_side // 2 ** (s + 1) for s in range(self.cfg.stages)]

    def encode(self, x: Tensor) -> List[Tensor]:
        """Encoder outputs, shallowest first; the last one is the 1x1 bottleneck."""
        self._check_input(x)
        feats = []
        h = x
        for s in range(self.cfg.stages):
            h = self.layers[f"enc{s}.conv"](h)
            if f"enc{s}.norm" in self.layers:
                h = self.layers[f"enc{s}.norm"](h)
            h = leaky_relu(h, self.cfg.leaky_slope)
            feats.append(h)
        return feats

    def forward(self, x: Tensor) -> Tensor:
        feats = self.encode(x)
        h = feats[-1]
        for s in range(self.cfg.stages - 1, 0, -1):
            h = relu(self.layers[f"dec{s}.norm"](self.layers[f"dec{s}.conv"](h)))
            h = concat_channels(h, feats[s - 1])
        out = self.layers["out.conv"](h)
        if self.cfg.residual_output:
            out = out + atanh(x, RESIDUAL_CLIP)
        return tanh(out)

    def zero_correction(self) -> "Generator":
        """Zero the output conv so a residual generator is exactly the identity."""
        for p in self.layers["out.conv"].params.values():
            p.data = np.zeros_like(p.data)
            p.grad = None
        return self

    def _check_input(self, x: Tensor) -> None:
        side = self.cfg.input_side
        if x.ndim != 4 or x.shape[1] != self.cfg.in_channels or x.shape[2:] != (side, side):
            raise ShapeMismatchError(
                f"generator expects N x {self.cfg.in_channels} x {side} x {side}, got {x.shape}"
            )


def build_generator(cfg: GeneratorConfig) -> Generator:
    """Construct an (uninitialized) generator; parameters start at zero / unit gamma."""
    net = Generator(cfg)
    logger.debug(
        f"Built generator: {cfg.stages} stages, channels {cfg.channels}, "
        f"{net.parameter_count()} parameters"
    )
    return net


def init_generator(cfg: GeneratorConfig, seed: int = 0, std: float = 0.02) -> Generator:
    """Build and initialize a generator.

    Residual generators get a zero output conv on top of the Gaussian init, so
    training starts from the identity map.
    """
    net = init_weights(build_generator(cfg), seed, std)
    if cfg.residual_output:
        net.zero_correction()
    return net
