"""On-device inference path.

Two shallow CNN encoders (low-resolution full spectrum, high-resolution
selected bands with a per-window spectral encoding channel) feed a fused
Multi-Res classifier; a Single-Res head over the shared low-resolution
encoder serves as the no-assistance fallback.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .tensor import (Tensor, adaptive_avg_pool_time, argmax, avg_pool2d,
                     conv2d, linear, relu, softmax)
from .wavelet import MultiResInput
from .weights import WeightStore, seeded_tensor

__all__ = [
    "EdgeModelConfig",
    "SpectralEncodingBank",
    "ClassScores",
    "spectral_encode",
    "low_features",
    "multi_res_forward",
    "single_res_forward",
    "init_edge_weights",
]


@dataclass(frozen=True)
class EdgeModelConfig:
    r_l: int = 16
    r_h: int = 64
    t_l: int = 16
    t_h: int = 16
    p: int = 8
    k: int = 2
    class_count: int = 10
    enc_channels: tuple[int, int] = (8, 16)
    cls_channels: tuple[int, int] = (16, 16)
    kernel_size: int = 3

    def __post_init__(self):
        if self.r_h % self.p != 0:
            raise ShapeError(f"p={self.p} must divide R_h={self.r_h}")
        if self.class_count < 2:
            raise ShapeError("need at least two classes")
        if not 1 <= self.k <= self.p:
            raise ShapeError(f"k={self.k} out of range 1..{self.p}")
        if self.kernel_size % 2 != 1:
            raise ShapeError("kernel size must be odd")

    @property
    def high_rows(self) -> int:
        return self.k * self.r_h // self.p

    @property
    def bank_size(self) -> int:
        return self.p - self.k + 1


@dataclass(frozen=True)
class SpectralEncodingBank:
    """One trainable [1, high_rows, T_h] tensor per window start position."""

    entries: tuple[Tensor, ...]

    @classmethod
    def from_store(cls, weights: WeightStore, cfg: EdgeModelConfig
                   ) -> "SpectralEncodingBank":
        entries = tuple(weights.get(f"spectral_encoding.{s}")
                        for s in range(cfg.bank_size))
        for s, t in enumerate(entries):
            if t.dims != (1, cfg.high_rows, cfg.t_h):
                raise ShapeError(
                    f"spectral_encoding.{s} has dims {t.dims}, expected "
                    f"(1, {cfg.high_rows}, {cfg.t_h})")
        return cls(entries)

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class ClassScores:
    probs: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.probs, dtype=np.float32)
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)

    @property
    def predicted(self) -> int:
        return argmax(Tensor(self.probs))


def spectral_encode(inp: MultiResInput, bank: SpectralEncodingBank) -> Tensor:
    """Stack the selected high-res bands with their window's encoding channel."""
    if not 0 <= inp.window_start < len(bank):
        raise ShapeError(
            f"window_start {inp.window_start} outside bank of {len(bank)} entries")
    encoding = bank.entries[inp.window_start]
    if encoding.dims[1:] != inp.high.shape:
        raise ShapeError(
            f"encoding {encoding.dims} does not match high bands {inp.high.shape}")
    return Tensor(np.stack([inp.high, encoding.data[0]], axis=0))


def _encoder(x: Tensor, weights: WeightStore, prefix: str,
             kernel_size: int) -> Tensor:
    pad = kernel_size // 2
    x = relu(conv2d(x, weights.get(f"{prefix}.conv1.weight"),
                    weights.get(f"{prefix}.conv1.bias"), padding=pad))
    x = avg_pool2d(x, 2)
    x = relu(conv2d(x, weights.get(f"{prefix}.conv2.weight"),
                    weights.get(f"{prefix}.conv2.bias"), padding=pad))
    return x


def _adaptive_pool_hw(x: Tensor, h_out: int, w_out: int) -> Tensor:
    pooled_w = adaptive_avg_pool_time(x, w_out)
    swapped = Tensor(pooled_w.data.transpose(0, 2, 1))
    pooled_h = adaptive_avg_pool_time(swapped, h_out)
    return Tensor(pooled_h.data.transpose(0, 2, 1))


def _classifier(features: Tensor, weights: WeightStore, prefix: str,
                kernel_size: int) -> ClassScores:
    pad = kernel_size // 2
    x = relu(conv2d(features, weights.get(f"{prefix}.conv1.weight"),
                    weights.get(f"{prefix}.conv1.bias"), padding=pad))
    if x.dims[1] >= 2 and x.dims[2] >= 2:
        x = avg_pool2d(x, 2)
    x = relu(conv2d(x, weights.get(f"{prefix}.conv2.weight"),
                    weights.get(f"{prefix}.conv2.bias"), padding=pad))
    pooled = Tensor(x.data.mean(axis=(1, 2), dtype=np.float32))
    logits = linear(pooled, weights.get(f"{prefix}.fc.weight"),
                    weights.get(f"{prefix}.fc.bias"))
    return ClassScores(softmax(logits).data)


def low_features(low: np.ndarray, weights: WeightStore,
                 cfg: EdgeModelConfig) -> Tensor:
    """Low-resolution encoder output, shared by both forward paths."""
    if low.shape != (cfg.r_l, cfg.t_l):
        raise ShapeError(f"low input {low.shape} != ({cfg.r_l}, {cfg.t_l})")
    return _encoder(Tensor(low[None, :, :]), weights, "low", cfg.kernel_size)


def multi_res_forward(inp: MultiResInput, weights: WeightStore,
                      cfg: EdgeModelConfig) -> ClassScores:
    """Assisted path: encode both resolutions, fuse channel-wise, classify.

    The two feature maps are adaptively average-pooled to the smaller spatial
    size per dimension before concatenation along channels.
    """
    if inp.high.shape != (cfg.high_rows, cfg.t_h):
        raise ShapeError(
            f"high input {inp.high.shape} != ({cfg.high_rows}, {cfg.t_h})")
    lo = low_features(inp.low, weights, cfg)
    bank = SpectralEncodingBank.from_store(weights, cfg)
    hi = _encoder(spectral_encode(inp, bank), weights, "high", cfg.kernel_size)
    h = min(lo.dims[1], hi.dims[1])
    w = min(lo.dims[2], hi.dims[2])
    lo = _adaptive_pool_hw(lo, h, w)
    hi = _adaptive_pool_hw(hi, h, w)
    fused = Tensor(np.concatenate([lo.data, hi.data], axis=0))
    return _classifier(fused, weights, "cls", cfg.kernel_size)


def single_res_forward(low: np.ndarray, weights: WeightStore,
                       cfg: EdgeModelConfig) -> ClassScores:
    """Fallback path: shared low-res encoder followed by the Single-Res head."""
    return _classifier(low_features(low, weights, cfg), weights, "single",
                       cfg.kernel_size)


def init_edge_weights(cfg: EdgeModelConfig, seed: int) -> WeightStore:
    """Reproducible random weights for encoders, classifiers, and the bank."""
    rng = np.random.default_rng(seed)
    store = WeightStore()
    ks = cfg.kernel_size
    c1, c2 = cfg.enc_channels
    g1, g2 = cfg.cls_channels

    def add_conv(name: str, c_out: int, c_in: int) -> None:
        scale = 1.0 / np.sqrt(c_in * ks * ks)
        store.add(f"{name}.weight", seeded_tensor(rng, (c_out, c_in, ks, ks), scale))
        store.add(f"{name}.bias", Tensor.zeros(c_out))

    add_conv("low.conv1", c1, 1)
    add_conv("low.conv2", c2, c1)
    add_conv("high.conv1", c1, 2)
    add_conv("high.conv2", c2, c1)
    add_conv("cls.conv1", g1, 2 * c2)
    add_conv("cls.conv2", g2, g1)
    store.add("cls.fc.weight", seeded_tensor(rng, (cfg.class_count, g2),
                                             1.0 / np.sqrt(g2)))
    store.add("cls.fc.bias", Tensor.zeros(cfg.class_count))
    add_conv("single.conv1", g1, c2)
    add_conv("single.conv2", g2, g1)
    store.add("single.fc.weight", seeded_tensor(rng, (cfg.class_count, g2),
                                                1.0 / np.sqrt(g2)))
    store.add("single.fc.bias", Tensor.zeros(cfg.class_count))
    for s in range(cfg.bank_size):
        store.add(f"spectral_encoding.{s}",
                  seeded_tensor(rng, (1, cfg.high_rows, cfg.t_h), 1.0))
    return store
