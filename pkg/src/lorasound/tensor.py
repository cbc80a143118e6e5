"""Minimal dense float32 tensor and the forward-pass primitives built on it.

Everything here is a pure function over immutable tensors; the model path
stays in 32-bit floats end to end.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ShapeError

__all__ = [
    "Tensor",
    "conv2d",
    "linear",
    "softmax",
    "relu",
    "avg_pool2d",
    "adaptive_avg_pool_time",
    "argmax",
]


@dataclass(frozen=True)
class Tensor:
    """Rank 1-4 float32 array, row-major, read-only after construction."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        if arr.ndim < 1 or arr.ndim > 4:
            raise ShapeError(f"tensor rank must be 1-4, got {arr.ndim}")
        if arr.size == 0:
            raise ShapeError("tensor must not be empty")
        if not np.all(np.isfinite(arr)):
            raise ShapeError("tensor contains NaN or Inf")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def dims(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def rank(self) -> int:
        return self.data.ndim

    @classmethod
    def zeros(cls, *dims: int) -> "Tensor":
        return cls(np.zeros(dims, dtype=np.float32))

    @classmethod
    def full(cls, dims: tuple[int, ...], value: float) -> "Tensor":
        return cls(np.full(dims, value, dtype=np.float32))


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ShapeError(msg)


def conv2d(inp: Tensor, kernel: Tensor, bias: Tensor, stride: int = 1,
           padding: int = 0) -> Tensor:
    """2D cross-correlation with zero padding (no kernel flip).

    Input is [C_in, H, W], kernel [C_out, C_in, kh, kw], bias [C_out];
    output spatial dims are floor((H + 2*padding - kh) / stride) + 1 and
    the same for W.
    """
    _require(inp.rank == 3, f"conv2d input must be [C,H,W], got {inp.dims}")
    _require(kernel.rank == 4, f"conv2d kernel must be rank 4, got {kernel.dims}")
    _require(bias.rank == 1, "conv2d bias must be rank 1")
    _require(stride >= 1, "stride must be positive")
    _require(padding >= 0, "padding must be non-negative")
    c_in, h, w = inp.dims
    c_out, kc, kh, kw = kernel.dims
    _require(kc == c_in, f"kernel expects {kc} input channels, input has {c_in}")
    _require(bias.dims == (c_out,), "bias length must equal output channels")
    _require(kh <= h + 2 * padding and kw <= w + 2 * padding,
             "kernel larger than padded input")
    x = inp.data
    if padding:
        x = np.pad(x, ((0, 0), (padding, padding), (padding, padding)))
    windows = sliding_window_view(x, (kh, kw), axis=(1, 2))[:, ::stride, ::stride]
    out = np.einsum("ihwkl,oikl->ohw", windows, kernel.data)
    out = out.astype(np.float32) + bias.data[:, None, None]
    return Tensor(out)


def linear(inp: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """out[m] = sum_n weight[m,n] * inp[n] + bias[m]."""
    _require(inp.rank == 1 and weight.rank == 2 and bias.rank == 1,
             "linear expects vector input, matrix weight, vector bias")
    m, n = weight.dims
    _require(inp.dims == (n,), f"weight expects input of length {n}, got {inp.dims}")
    _require(bias.dims == (m,), "bias length must equal weight rows")
    return Tensor(weight.data @ inp.data + bias.data)


def softmax(inp: Tensor) -> Tensor:
    """Numerically stable softmax over a rank-1 tensor (max subtracted)."""
    _require(inp.rank == 1, "softmax expects a rank-1 tensor")
    z = inp.data - inp.data.max()
    e = np.exp(z)
    return Tensor(e / e.sum())


def relu(inp: Tensor) -> Tensor:
    return Tensor(np.maximum(inp.data, np.float32(0.0)))


def avg_pool2d(inp: Tensor, kernel: int, stride: int | None = None) -> Tensor:
    """Average pooling over [C, H, W], square window, default stride=kernel."""
    _require(inp.rank == 3, "avg_pool2d expects [C,H,W]")
    _require(kernel >= 1, "pool kernel must be positive")
    stride = kernel if stride is None else stride
    c, h, w = inp.dims
    _require(kernel <= h and kernel <= w, "pool window larger than input")
    windows = sliding_window_view(inp.data, (kernel, kernel), axis=(1, 2))
    out = windows[:, ::stride, ::stride].mean(axis=(3, 4), dtype=np.float32)
    return Tensor(out)


def pool_axis_sections(length: int, parts: int) -> list[tuple[int, int]]:
    """Contiguous near-equal windows covering [0, length), longer windows first."""
    if parts < 1 or parts > length:
        raise ShapeError(f"cannot pool length {length} into {parts} windows")
    base, extra = divmod(length, parts)
    bounds = []
    start = 0
    for i in range(parts):
        size = base + (1 if i < extra else 0)
        bounds.append((start, start + size))
        start += size
    return bounds


def adaptive_avg_pool_time(inp: Tensor, t_out: int) -> Tensor:
    """Pool the last (time) axis into t_out windows whose sizes differ by <=1."""
    sections = pool_axis_sections(inp.dims[-1], t_out)
    cols = [inp.data[..., a:b].mean(axis=-1, dtype=np.float32) for a, b in sections]
    return Tensor(np.stack(cols, axis=-1))


def argmax(inp: Tensor) -> int:
    """Index of the maximum of a rank-1 tensor; ties break to the lowest index."""
    _require(inp.rank == 1, "argmax expects a rank-1 tensor")
    return int(np.argmax(inp.data))
