"""Image operators for NCHW tensors: convolution, upsampling, instance norm, concat."""

from typing import Optional, Tuple

import numpy as np

from ..shared.errors import ShapeMismatchError
from .tensor import Tensor, make_result

INSTANCE_NORM_EPS = 1e-5


def conv_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def conv2d(
    x: Tensor, w: Tensor, b: Optional[Tensor] = None, stride: int = 1, padding: int = 0
) -> Tensor:
    """2-D cross-correlation of x[N,C,H,W] with w[F,C,k,k] plus per-filter bias."""
    if x.ndim != 4 or w.ndim != 4:
        raise ShapeMismatchError(f"conv2d expects 4-D input and weight, got {x.shape} and {w.shape}")
    n, c, h, wd = x.shape
    f, wc, kh, kw = w.shape
    if wc != c:
        raise ShapeMismatchError(f"conv2d: input has {c} channels, weight expects {wc}")
    if kh != kw or kh < 1:
        raise ShapeMismatchError(f"conv2d: kernel must be square and non-empty, got {kh}x{kw}")
    if stride < 1 or padding < 0:
        raise ValueError(f"conv2d: invalid stride {stride} or padding {padding}")
    if h + 2 * padding < kh or wd + 2 * padding < kh:
        raise ShapeMismatchError(
            f"conv2d: padded input {h + 2 * padding}x{wd + 2 * padding} smaller than kernel {kh}"
        )
    if b is not None and b.shape != (f,):
        raise ShapeMismatchError(f"conv2d: bias shape {b.shape} does not match {f} filters")

    k = kh
    pad = ((0, 0), (0, 0), (padding, padding), (padding, padding))
    xp = np.pad(x.data, pad) if padding else x.data
    ho = conv_output_size(h, k, stride, padding)
    wo = conv_output_size(wd, k, stride, padding)
    w_data = w.data

    def tap(i: int, j: int) -> Tuple[slice, slice]:
        """Input rows/cols read by kernel offset (i, j) for every output pixel."""
        return slice(i, i + stride * (ho - 1) + 1, stride), slice(j, j + stride * (wo - 1) + 1, stride)

    # one (N,C,Ho,Wo) x (F,C) contraction per kernel offset
    acc = np.zeros((n, ho, wo, f), dtype=np.result_type(x.dtype, w.dtype))
    for i in range(k):
        for j in range(k):
            rows, cols = tap(i, j)
            acc += np.tensordot(xp[:, :, rows, cols], w_data[:, :, i, j], axes=([1], [1]))
    if b is not None:
        acc += b.data
    out = np.ascontiguousarray(acc.transpose(0, 3, 1, 2), dtype=x.dtype)

    def backward_fn(g: np.ndarray):
        dw = np.empty_like(w_data)
        dxp = np.zeros(xp.shape, dtype=x.dtype)
        for i in range(k):
            for j in range(k):
                rows, cols = tap(i, j)
                dw[:, :, i, j] = np.tensordot(g, xp[:, :, rows, cols], axes=([0, 2, 3], [0, 2, 3]))
                dxp[:, :, rows, cols] += np.tensordot(
                    g, w_data[:, :, i, j], axes=([1], [0])
                ).transpose(0, 3, 1, 2)
        dx = dxp[:, :, padding:padding + h, padding:padding + wd] if padding else dxp
        if b is None:
            return dx, dw
        return dx, dw, g.sum(axis=(0, 2, 3)).astype(b.dtype, copy=False)

    inputs = (x, w) if b is None else (x, w, b)
    return make_result(out, inputs, backward_fn)


def upsample_nearest2x(x: Tensor) -> Tensor:
    """Replicate every pixel into a 2x2 block."""
    if x.ndim != 4:
        raise ShapeMismatchError(f"upsample expects NCHW, got {x.shape}")
    n, c, h, w = x.shape
    out = x.data.repeat(2, axis=2).repeat(2, axis=3)
    return make_result(
        out, (x,), lambda g: (g.reshape(n, c, h, 2, w, 2).sum(axis=(3, 5)),)
    )


def upsample_conv(x: Tensor, w: Tensor, b: Optional[Tensor] = None) -> Tensor:
    """Nearest-neighbour 2x upsampling followed by a 3x3, stride-1, padding-1 convolution."""
    if w.ndim != 4 or w.shape[2:] != (3, 3):
        raise ShapeMismatchError(f"upsample_conv needs a 3x3 kernel, got weight {w.shape}")
    return conv2d(upsample_nearest2x(x), w, b, stride=1, padding=1)


def instance_norm(
    x: Tensor, gamma: Tensor, beta: Tensor, eps: float = INSTANCE_NORM_EPS
) -> Tensor:
    """Normalize every (n, c) plane to zero mean / unit variance, then scale and shift."""
    if x.ndim != 4:
        raise ShapeMismatchError(f"instance_norm expects NCHW, got {x.shape}")
    n, c, h, w = x.shape
    m = h * w
    if m < 2:
        raise ShapeMismatchError(f"instance_norm needs at least 2 pixels per plane, got {h}x{w}")
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ShapeMismatchError(
            f"instance_norm: gamma {gamma.shape} / beta {beta.shape} must be ({c},)"
        )

    mean = x.data.mean(axis=(2, 3), keepdims=True)
    centered = x.data - mean
    var = (centered * centered).mean(axis=(2, 3), keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    g4 = gamma.data[None, :, None, None]
    out = (xhat * g4 + beta.data[None, :, None, None]).astype(x.dtype, copy=False)

    def backward_fn(g: np.ndarray):
        dgamma = (g * xhat).sum(axis=(0, 2, 3)).astype(gamma.dtype, copy=False)
        dbeta = g.sum(axis=(0, 2, 3)).astype(beta.dtype, copy=False)
        dxhat = g * g4
        dx = inv_std * (
            dxhat
            - dxhat.mean(axis=(2, 3), keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=(2, 3), keepdims=True)
        )
        return dx.astype(x.dtype, copy=False), dgamma, dbeta

    return make_result(out, (x, gamma, beta), backward_fn)


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    """Stack two NCHW tensors along the channel axis."""
    if a.ndim != 4 or b.ndim != 4:
        raise ShapeMismatchError(f"concat_channels expects NCHW, got {a.shape} and {b.shape}")
    if (a.shape[0], a.shape[2], a.shape[3]) != (b.shape[0], b.shape[2], b.shape[3]):
        raise ShapeMismatchError(f"concat_channels: {a.shape} and {b.shape} disagree outside channels")
    ca = a.shape[1]
    out = np.concatenate([a.data, b.data], axis=1)
    return make_result(out, (a, b), lambda g: (g[:, :ca], g[:, ca:]))
