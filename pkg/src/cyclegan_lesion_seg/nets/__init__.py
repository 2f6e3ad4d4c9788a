"""Generator and discriminator construction, initialization and checkpoints."""

from .checkpoint import load_arrays, load_network, save_arrays, save_network
from .discriminator import (
    Discriminator,
    build_discriminator,
    output_side,
    receptive_field,
    receptive_field_bounds,
)
from .generator import Generator, build_generator, init_generator
from .layers import Conv2d, InstanceNorm, Layer, Network, UpConv2d, init_weights, parameters_of

__all__ = [
    "Conv2d",
    "Discriminator",
    "Generator",
    "InstanceNorm",
    "Layer",
    "Network",
    "UpConv2d",
    "build_discriminator",
    "build_generator",
    "init_generator",
    "init_weights",
    "load_arrays",
    "load_network",
    "output_side",
    "parameters_of",
    "receptive_field",
    "receptive_field_bounds",
    "save_arrays",
    "save_network",
]
