"""Audio clip container and the mono 16-bit PCM WAV reader."""

from __future__ import annotations

import io
import wave
from dataclasses import dataclass

import numpy as np

from .errors import AudioFormatError

CANONICAL_RATE_HZ = 16000
DEFAULT_MAX_DEPTH = 10  # clips are padded so every depth up to this divides


@dataclass(frozen=True)
class AudioClip:
    """Float32 samples in [-1, 1], zero-padded to a multiple of 2**max_depth.

    ``n_source_samples`` is the length before padding.
    """

    samples: np.ndarray
    sample_rate_hz: int
    n_source_samples: int

    def __post_init__(self):
        arr = np.ascontiguousarray(self.samples, dtype=np.float32)
        if arr.ndim != 1 or arr.size == 0:
            raise AudioFormatError("clip must be a non-empty 1-D sample array")
        if self.sample_rate_hz <= 0:
            raise AudioFormatError("sample rate must be positive")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.n_source_samples / self.sample_rate_hz


def _pad_samples(samples: np.ndarray, max_depth: int) -> np.ndarray:
    block = 1 << max_depth
    pad = (-samples.size) % block
    if pad:
        samples = np.concatenate([samples, np.zeros(pad, dtype=np.float32)])
    return samples


def clip_from_samples(samples: np.ndarray, sample_rate_hz: int,
                      max_depth: int = DEFAULT_MAX_DEPTH) -> AudioClip:
    """Wrap raw float samples, applying the loader's zero padding."""
    samples = np.asarray(samples, dtype=np.float32)
    return AudioClip(_pad_samples(samples, max_depth), sample_rate_hz, samples.size)


def load_wav(data: bytes, max_depth: int = DEFAULT_MAX_DEPTH) -> AudioClip:
    """Parse mono 16-bit PCM WAV bytes; samples are scaled by 1/32768."""
    try:
        with wave.open(io.BytesIO(data), "rb") as wav:
            if wav.getnchannels() != 1:
                raise AudioFormatError(
                    f"expected mono audio, got {wav.getnchannels()} channels")
            if wav.getsampwidth() != 2:
                raise AudioFormatError(
                    f"expected 16-bit PCM, got {8 * wav.getsampwidth()}-bit")
            if wav.getcomptype() != "NONE":
                raise AudioFormatError(f"unsupported compression {wav.getcomptype()!r}")
            rate = wav.getframerate()
            frames = wav.readframes(wav.getnframes())
    except wave.Error as exc:
        raise AudioFormatError(f"not a PCM WAV file: {exc}") from None
    pcm = np.frombuffer(frames, dtype="<i2")
    if pcm.size == 0:
        raise AudioFormatError("WAV file contains no samples")
    samples = pcm.astype(np.float32) / 32768.0
    return AudioClip(_pad_samples(samples, max_depth), rate, samples.size)


def save_wav(clip: AudioClip) -> bytes:
    """Write the un-padded samples back out as mono 16-bit PCM WAV."""
    pcm = np.clip(np.rint(clip.samples[:clip.n_source_samples] * 32768.0),
                  -32768, 32767).astype("<i2")
    buf = io.BytesIO()
    with wave.open(buf, "wb") as wav:
        wav.setnchannels(1)
        wav.setsampwidth(2)
        wav.setframerate(clip.sample_rate_hz)
        wav.writeframes(pcm.tobytes())
    return buf.getvalue()


def synthesize_clip(seed: int, duration_s: float = 4.0,
                    sample_rate_hz: int = CANONICAL_RATE_HZ,
                    max_depth: int = DEFAULT_MAX_DEPTH) -> AudioClip:
    """Deterministic stand-in clip: band-limited noise plus two tones."""
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * sample_rate_hz))
    t = np.arange(n) / sample_rate_hz
    f1, f2 = rng.uniform(100.0, sample_rate_hz / 2.5, size=2)
    x = (0.4 * np.sin(2 * np.pi * f1 * t)
         + 0.3 * np.sin(2 * np.pi * f2 * t)
         + 0.2 * rng.standard_normal(n))
    x = np.clip(x, -1.0, 1.0).astype(np.float32)
    return AudioClip(_pad_samples(x, max_depth), sample_rate_hz, n)
