"""Named tensor store and the portable "OWT1" weight-file codec.

File layout (all integers and floats little-endian):

    magic   4 bytes  b"OWT1"
    count   u32      number of entries
    entry   repeated:
        name_len  u16
        name      name_len ASCII bytes
        rank      u8  (1-4)
        dims      rank x u32
        data      prod(dims) x f32
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import DecodeError, MissingWeightError
from .tensor import Tensor

MAGIC = b"OWT1"
_MAX_ELEMENTS = 1 << 28  # 1 GiB of f32; anything larger is a corrupt header


class WeightStore:
    """Ordered mapping of unique ASCII names to tensors."""

    def __init__(self):
        self._entries: dict[str, Tensor] = {}

    def add(self, name: str, tensor: Tensor) -> None:
        if not name or not name.isascii():
            raise ValueError(f"weight name must be non-empty ASCII: {name!r}")
        if len(name.encode()) > 0xFFFF:
            raise ValueError("weight name too long")
        if name in self._entries:
            raise ValueError(f"duplicate weight name: {name!r}")
        self._entries[name] = tensor

    def get(self, name: str) -> Tensor:
        try:
            return self._entries[name]
        except KeyError:
            raise MissingWeightError(f"missing weight: {name!r}") from None

    def __getitem__(self, name: str) -> Tensor:
        return self.get(name)

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def names(self) -> list[str]:
        return list(self._entries)

    def items(self):
        return self._entries.items()


def save_weights(store: WeightStore) -> bytes:
    out = bytearray(MAGIC)
    out += struct.pack("<I", len(store))
    for name, tensor in store.items():
        raw = name.encode("ascii")
        out += struct.pack("<H", len(raw))
        out += raw
        out += struct.pack("<B", tensor.rank)
        out += struct.pack(f"<{tensor.rank}I", *tensor.dims)
        out += np.ascontiguousarray(tensor.data, dtype="<f4").tobytes()
    return bytes(out)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.off = 0

    def take(self, n: int, what: str) -> bytes:
        if self.off + n > len(self.buf):
            raise DecodeError(
                f"truncated weight file: need {n} bytes for {what} "
                f"at offset {self.off}, have {len(self.buf) - self.off}")
        chunk = self.buf[self.off:self.off + n]
        self.off += n
        return chunk


def load_weights(buf: bytes) -> WeightStore:
    """Decode an "OWT1" byte string; raises DecodeError naming the offset."""
    r = _Reader(buf)
    if r.take(4, "magic") != MAGIC:
        raise DecodeError("bad magic at offset 0: not an OWT1 weight file")
    (count,) = struct.unpack("<I", r.take(4, "entry count"))
    store = WeightStore()
    for _ in range(count):
        entry_off = r.off
        (name_len,) = struct.unpack("<H", r.take(2, "name length"))
        raw = r.take(name_len, "name")
        try:
            name = raw.decode("ascii")
        except UnicodeDecodeError:
            raise DecodeError(f"non-ASCII name at offset {entry_off}") from None
        (rank,) = struct.unpack("<B", r.take(1, "rank"))
        if not 1 <= rank <= 4:
            raise DecodeError(f"invalid rank {rank} at offset {entry_off}")
        dims = struct.unpack(f"<{rank}I", r.take(4 * rank, "dims"))
        n = 1
        for d in dims:
            if d == 0:
                raise DecodeError(f"zero dimension at offset {entry_off}")
            n *= d
        if n > _MAX_ELEMENTS:
            raise DecodeError(f"dimension overflow at offset {entry_off}")
        data = np.frombuffer(r.take(4 * n, f"data of {name!r}"), dtype="<f4")
        try:
            store.add(name, Tensor(data.reshape(dims)))
        except ValueError as exc:
            raise DecodeError(f"bad entry at offset {entry_off}: {exc}") from None
    if r.off != len(buf):
        raise DecodeError(f"{len(buf) - r.off} trailing bytes at offset {r.off}")
    return store


def seeded_tensor(rng: np.random.Generator, dims: tuple[int, ...],
                  scale: float) -> Tensor:
    """Gaussian init draw; the caller fixes the rng so results are reproducible."""
    return Tensor(rng.normal(0.0, scale, size=dims).astype(np.float32))
