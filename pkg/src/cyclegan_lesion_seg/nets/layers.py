"""Parameterized layers and the Network container shared by generator and discriminator."""

import logging
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from ..autodiff import Tensor, conv2d, instance_norm, upsample_conv
from ..shared.errors import ShapeMismatchError

logger = logging.getLogger(__name__)


class Layer:
    """Holds named parameters; subclasses implement ``__call__``."""

    def __init__(self):
        self.params: Dict[str, Tensor] = {}

    def _param(self, name: str, shape: Tuple[int, ...], fill: float = 0.0) -> Tensor:
        t = Tensor(np.full(shape, fill, dtype=np.float32), requires_grad=True)
        self.params[name] = t
        return t


class Conv2d(Layer):
    """Square-kernel convolution with per-filter bias."""

    def __init__(self, in_ch: int, out_ch: int, kernel: int, stride: int = 1, padding: int = 0):
        super().__init__()
        self.in_ch, self.out_ch = in_ch, out_ch
        self.kernel, self.stride, self.padding = kernel, stride, padding
        self._param("weight", (out_ch, in_ch, kernel, kernel))
        self._param("bias", (out_ch,))

    def __call__(self, x: Tensor) -> Tensor:
        return conv2d(x, self.params["weight"], self.params["bias"], self.stride, self.padding)


class UpConv2d(Conv2d):
    """2x nearest-neighbour upsampling followed by a 3x3 same-size convolution."""

    def __init__(self, in_ch: int, out_ch: int):
        super().__init__(in_ch, out_ch, kernel=3, stride=1, padding=1)

    def __call__(self, x: Tensor) -> Tensor:
        return upsample_conv(x, self.params["weight"], self.params["bias"])


class InstanceNorm(Layer):
    """Per-plane normalization with a learned per-channel affine."""

    def __init__(self, channels: int):
        super().__init__()
        self.channels = channels
        self._param("gamma", (channels,), fill=1.0)
        self._param("beta", (channels,))

    def __call__(self, x: Tensor) -> Tensor:
        return instance_norm(x, self.params["gamma"], self.params["beta"])


class Network:
    """Ordered collection of named layers with a forward contract."""

    def __init__(self):
        self.layers: Dict[str, Layer] = {}

    def add(self, name: str, layer: Layer) -> Layer:
        if name in self.layers:
            raise ValueError(f"duplicate layer name {name!r}")
        self.layers[name] = layer
        return layer

    def forward(self, x: Tensor) -> Tensor:
        raise NotImplementedError

    def __call__(self, x: Tensor) -> Tensor:
        return self.forward(x)

    def named_parameters(self) -> Iterator[Tuple[str, Tensor]]:
        for layer_name, layer in self.layers.items():
            for pname, p in layer.params.items():
                yield f"{layer_name}.{pname}", p

    def parameters(self) -> List[Tensor]:
        return [p for _, p in self.named_parameters()]

    def parameter_count(self) -> int:
        return int(sum(p.data.size for p in self.parameters()))

    def set_requires_grad(self, flag: bool) -> "Network":
        for p in self.parameters():
            p.requires_grad = flag
        return self

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def astype(self, dtype) -> "Network":
        """Convert every parameter in place (float64 for gradient checks)."""
        for p in self.parameters():
            p.data = p.data.astype(dtype)
            p.grad = None
        return self

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: Dict[str, np.ndarray], strict: bool = True) -> None:
        """Copy arrays into matching parameters; shapes must agree."""
        own = dict(self.named_parameters())
        missing = sorted(set(own) - set(state))
        unexpected = sorted(set(state) - set(own))
        if strict and (missing or unexpected):
            raise ShapeMismatchError(
                f"parameter names differ: missing {missing[:5]}, unexpected {unexpected[:5]}"
            )
        for name, p in own.items():
            if name not in state:
                continue
            arr = np.asarray(state[name])
            if arr.shape != p.shape:
                raise ShapeMismatchError(f"{name}: checkpoint shape {arr.shape} != parameter {p.shape}")
            p.data = arr.astype(p.dtype, copy=True)


def init_weights(net: Network, seed: int = 0, std: float = 0.02, dtype=np.float32) -> Network:
    """Gaussian N(0, std^2) conv weights, zero biases, unit gammas, zero betas.

    Parameters are drawn in declaration order from one seeded generator, so the
    same seed gives bit-identical parameters.
    """
    if std <= 0:
        raise ValueError(f"init std must be positive, got {std}")
    rng = np.random.default_rng(seed)
    for name, p in net.named_parameters():
        kind = name.rsplit(".", 1)[-1]
        if kind == "weight":
            p.data = rng.normal(0.0, std, size=p.shape).astype(dtype)
        elif kind == "gamma":
            p.data = np.ones(p.shape, dtype=dtype)
        else:
            p.data = np.zeros(p.shape, dtype=dtype)
        p.grad = None
    logger.debug(f"Initialized {net.parameter_count()} parameters (seed={seed}, std={std})")
    return net


def parameters_of(*nets: Optional[Network]) -> List[Tensor]:
    return [p for net in nets if net is not None for p in net.parameters()]
