"""Wavelet packet front end.

A depth-n packet decomposition splits the signal into 2**n equal-width
frequency bands via a full binary filter-bank tree with periodic boundary
extension. Tree leaves are reordered from natural (Paley) order to sequency
order with the binary-reflected Gray code, so row index increases with band
center frequency. Analysis/synthesis run in float64 internally; stored
coefficients are float32.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import AudioClip
from .errors import MaskValidationError, ShapeError
from .tensor import pool_axis_sections

__all__ = [
    "WptSpectrogram",
    "AssistSpectrogram",
    "QuantizedSpectrogram",
    "MultiResInput",
    "wavelet_filters",
    "wpt_decompose",
    "wpt_reconstruct",
    "time_avg_pool",
    "quantize",
    "dequantize",
    "low_res_spectrogram",
    "refine_bands",
]

# Orthonormal scaling (lowpass) filters; the highpass is the QMF mirror.
_HAAR = np.array([1.0, 1.0]) / np.sqrt(2.0)
_DB4 = np.array([
    0.23037781330885523, 0.7148465705525415, 0.6308807679295904,
    -0.02798376941698385, -0.18703481171888114, 0.030841381835986965,
    0.032883011666982945, -0.010597401784997278,
])
_FILTERS = {"haar": _HAAR, "db4": _DB4}

DEFAULT_WAVELET = "db4"


def wavelet_filters(name: str) -> tuple[np.ndarray, np.ndarray]:
    """Return (lowpass, highpass) analysis filters for 'haar' or 'db4'."""
    try:
        h = _FILTERS[name]
    except KeyError:
        raise ValueError(f"unknown wavelet {name!r}; choose from {sorted(_FILTERS)}")
    g = np.array([(-1.0) ** m * h[h.size - 1 - m] for m in range(h.size)])
    return h, g


def _gray_permutation(n_rows: int) -> np.ndarray:
    # sequency rank i lives at natural index gray(i) = i ^ (i >> 1)
    idx = np.arange(n_rows)
    return idx ^ (idx >> 1)


@dataclass(frozen=True)
class WptSpectrogram:
    """Band x frame coefficient matrix; rows in sequency (frequency) order."""

    depth: int
    values: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        arr = np.ascontiguousarray(self.values, dtype=np.float32)
        if arr.ndim != 2 or arr.shape[0] != 1 << self.depth:
            raise ShapeError(
                f"spectrogram at depth {self.depth} needs {1 << self.depth} rows, "
                f"got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def bands(self) -> int:
        return self.values.shape[0]

    @property
    def frames(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class AssistSpectrogram:
    """Square band x pooled-time matrix uplinked for feature selection."""

    grid: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.grid, dtype=np.float32)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ShapeError(f"assistance spectrogram must be square, got {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "grid", arr)

    @property
    def dim(self) -> int:
        return self.grid.shape[0]


@dataclass(frozen=True)
class QuantizedSpectrogram:
    """u8 min-max quantization of an AssistSpectrogram; payload = dim**2 bytes."""

    dim: int
    scale: float
    offset: float
    cells: np.ndarray  # uint8, length dim**2, row-major

    def __post_init__(self):
        arr = np.ascontiguousarray(self.cells, dtype=np.uint8)
        if arr.ndim != 1 or arr.size != self.dim * self.dim:
            raise ShapeError("quantized cell count must equal dim**2")
        arr.setflags(write=False)
        object.__setattr__(self, "cells", arr)

    @property
    def payload_bytes(self) -> int:
        return self.dim * self.dim


@dataclass(frozen=True)
class MultiResInput:
    """Low-resolution full-spectrum matrix plus the selected high-res bands."""

    low: np.ndarray           # [R_l, T_l]
    high: np.ndarray          # [(k/p)*R_h, T_h]
    window_start: int

    def __post_init__(self):
        low = np.ascontiguousarray(self.low, dtype=np.float32)
        high = np.ascontiguousarray(self.high, dtype=np.float32)
        low.setflags(write=False)
        high.setflags(write=False)
        object.__setattr__(self, "low", low)
        object.__setattr__(self, "high", high)


def _analyze(rows: np.ndarray, h: np.ndarray, g: np.ndarray):
    length = rows.shape[-1]
    k = np.arange(length // 2)
    approx = np.zeros(rows.shape[:-1] + (length // 2,))
    detail = np.zeros_like(approx)
    for m in range(h.size):
        tap = rows[..., (2 * k + m) % length]
        approx += h[m] * tap
        detail += g[m] * tap
    return approx, detail


def _synthesize(approx: np.ndarray, detail: np.ndarray,
                h: np.ndarray, g: np.ndarray) -> np.ndarray:
    length = 2 * approx.shape[-1]
    out = np.zeros(approx.shape[:-1] + (length,))
    k = np.arange(approx.shape[-1])
    for m in range(h.size):
        # indices (2k + m) mod length are distinct for fixed m
        out[..., (2 * k + m) % length] += h[m] * approx + g[m] * detail
    return out


def decompose_samples(samples: np.ndarray, depth: int, wavelet: str) -> np.ndarray:
    """Depth-n packet decomposition of a 1-D signal, rows in sequency order."""
    if depth < 1:
        raise ShapeError("depth must be at least 1")
    n = samples.shape[-1]
    if n % (1 << depth) != 0:
        raise ShapeError(
            f"signal length {n} not divisible by 2**{depth}")
    h, g = wavelet_filters(wavelet)
    rows = np.asarray(samples, dtype=np.float64)[None, :]
    for _ in range(depth):
        approx, detail = _analyze(rows, h, g)
        # natural order: each parent's lowpass child precedes its highpass child
        rows = np.stack([approx, detail], axis=1).reshape(-1, approx.shape[-1])
    return rows[_gray_permutation(rows.shape[0])].astype(np.float32)


def wpt_decompose(clip: AudioClip, depth: int, wavelet: str = DEFAULT_WAVELET
                  ) -> WptSpectrogram:
    """Full packet decomposition of a clip into 2**depth sequency-ordered bands."""
    values = decompose_samples(clip.samples, depth, wavelet)
    return WptSpectrogram(depth, values, clip.sample_rate_hz)


def wpt_reconstruct(spec: WptSpectrogram, wavelet: str = DEFAULT_WAVELET
                    ) -> AudioClip:
    """Invert wpt_decompose; exact up to float32 rounding."""
    h, g = wavelet_filters(wavelet)
    seq = np.asarray(spec.values, dtype=np.float64)
    natural = np.empty_like(seq)
    natural[_gray_permutation(seq.shape[0])] = seq
    while natural.shape[0] > 1:
        natural = _synthesize(natural[0::2], natural[1::2], h, g)
    samples = natural[0].astype(np.float32)
    return AudioClip(samples, spec.sample_rate_hz, samples.size)


def time_avg_pool(spec: WptSpectrogram) -> AssistSpectrogram:
    """Pool each band row to 2**depth frames, yielding a square matrix."""
    if spec.frames < spec.bands:
        raise ShapeError(
            f"cannot pool {spec.frames} frames into {spec.bands} windows")
    sections = pool_axis_sections(spec.frames, spec.bands)
    cols = [spec.values[:, a:b].mean(axis=1, dtype=np.float32) for a, b in sections]
    return AssistSpectrogram(np.stack(cols, axis=1))


def quantize(s_a: AssistSpectrogram) -> QuantizedSpectrogram:
    """Affine min-max quantization to u8; constant input maps to all-zero cells.

    Scale and offset are stored at float32 precision so a wire roundtrip
    through 4-byte floats is lossless.
    """
    grid = s_a.grid
    lo = float(grid.min())
    hi = float(grid.max())
    scale = np.float32((hi - lo) / 255.0)
    offset = np.float32(lo)
    if scale > 0:
        cells = np.clip(np.rint((grid - offset) / scale), 0, 255).astype(np.uint8)
    else:
        cells = np.zeros_like(grid, dtype=np.uint8)
    return QuantizedSpectrogram(s_a.dim, float(scale), float(offset),
                                cells.reshape(-1))


def dequantize(q: QuantizedSpectrogram) -> AssistSpectrogram:
    grid = (np.float32(q.offset)
            + q.cells.astype(np.float32) * np.float32(q.scale))
    return AssistSpectrogram(grid.reshape(q.dim, q.dim))


def _pool_rows_to(values: np.ndarray, t_out: int) -> np.ndarray:
    if values.shape[1] < t_out:
        raise ShapeError(
            f"cannot pool {values.shape[1]} frames into {t_out} windows")
    sections = pool_axis_sections(values.shape[1], t_out)
    return np.stack(
        [values[:, a:b].mean(axis=1, dtype=np.float32) for a, b in sections], axis=1)


def low_res_spectrogram(clip: AudioClip, r_l: int, t_l: int,
                        wavelet: str = DEFAULT_WAVELET) -> np.ndarray:
    """Full-spectrum [R_l, T_l] input for the low-resolution encoder."""
    if r_l & (r_l - 1) or r_l < 2:
        raise ShapeError(f"R_l must be a power of two >= 2, got {r_l}")
    rows = decompose_samples(clip.samples, r_l.bit_length() - 1, wavelet)
    return _pool_rows_to(rows, t_l)


def refine_bands(clip: AudioClip, mask, r_l: int, r_h: int, t_l: int, t_h: int,
                 wavelet: str = DEFAULT_WAVELET) -> MultiResInput:
    """Build the multi-resolution input selected by a spectral attention mask.

    ``low`` is the full depth-log2(R_l) spectrogram pooled to T_l columns.
    ``high`` holds the depth-log2(R_h) rows covered by the mask's k contiguous
    patch rows, pooled to T_h columns.
    """
    for name, r in (("R_l", r_l), ("R_h", r_h)):
        if r & (r - 1) or r < 2:
            raise ShapeError(f"{name} must be a power of two >= 2, got {r}")
    if r_h <= r_l:
        raise ShapeError(f"R_h ({r_h}) must exceed R_l ({r_l})")
    p = len(mask.bits)
    if r_h % p != 0:
        raise MaskValidationError(f"mask length {p} does not divide R_h {r_h}")
    low = low_res_spectrogram(clip, r_l, t_l, wavelet)
    rows = decompose_samples(clip.samples, r_h.bit_length() - 1, wavelet)
    rows_per_patch = r_h // p
    start = mask.window_start * rows_per_patch
    stop = (mask.window_start + mask.k) * rows_per_patch
    high = _pool_rows_to(rows[start:stop], t_h)
    return MultiResInput(low=low, high=high, window_start=mask.window_start)
