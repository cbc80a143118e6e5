"""Edge/server assistance exchange: payload codecs, transports, UDP server.

Both the in-process and the UDP transport push every request through the
same frame codec, so a networked run is byte-for-byte equivalent to an
in-process run under a zero-loss shim.
"""

from __future__ import annotations

import logging
import math
import socket
import struct
import threading
from dataclasses import dataclass

import numpy as np

from .attention import (SpectralAttentionMask, VitConfig, generate_mask,
                        mask_from_bytes, mask_to_bytes)
from .errors import DecodeError, DownlinkLost, FramingError, IntegrityError
from .lora import (AdrState, LoRaParams, MsgType, adr_step, frame_decode,
                   frame_encode)
from .wavelet import QuantizedSpectrogram, dequantize
from .weights import WeightStore

log = logging.getLogger(__name__)

# scale f32, offset f32, snr f32, sf u8, ptx u8; cells follow
_UPLINK_HEAD = struct.Struct("<fffBB")

__all__ = [
    "encode_uplink",
    "decode_uplink",
    "encode_downlink",
    "decode_downlink",
    "AssistServer",
    "LossShim",
    "InProcessTransport",
    "UdpTransport",
    "serve",
]


def encode_uplink(q: QuantizedSpectrogram, snr_db: float,
                  params: LoRaParams) -> bytes:
    """Quantized spectrogram plus link metadata the gateway would observe."""
    head = _UPLINK_HEAD.pack(q.scale, q.offset, snr_db, params.sf, params.ptx_dbm)
    return head + q.cells.tobytes()


def decode_uplink(payload: bytes) -> tuple[QuantizedSpectrogram, float, LoRaParams]:
    if len(payload) < _UPLINK_HEAD.size:
        raise DecodeError(f"uplink payload of {len(payload)} B is too short")
    scale, offset, snr_db, sf, ptx = _UPLINK_HEAD.unpack_from(payload)
    cells = np.frombuffer(payload[_UPLINK_HEAD.size:], dtype=np.uint8)
    dim = math.isqrt(cells.size)
    if dim * dim != cells.size or dim == 0:
        raise DecodeError(f"uplink carries {cells.size} cells, not a square count")
    return (QuantizedSpectrogram(dim, scale, offset, cells), snr_db,
            LoRaParams(sf, ptx))


def encode_downlink(mask: SpectralAttentionMask, rec: LoRaParams) -> bytes:
    return mask_to_bytes(mask) + bytes([rec.sf, rec.ptx_dbm])


def decode_downlink(payload: bytes, p: int) -> tuple[SpectralAttentionMask, LoRaParams]:
    mask_len = (p + 7) // 8
    if len(payload) != mask_len + 2:
        raise DecodeError(f"downlink payload must be {mask_len + 2} B for p={p}, "
                          f"got {len(payload)}")
    mask = mask_from_bytes(payload[:mask_len], p)
    return mask, LoRaParams(payload[mask_len], payload[mask_len + 1])


class AssistServer:
    """Server side of one device's assistance sessions.

    Holds the transformer weights and a sliding ADR window; every valid
    uplink yields a spectral attention mask and a parameter recommendation.
    """

    def __init__(self, weights: WeightStore, vit: VitConfig, k: int,
                 adr: AdrState | None = None):
        self.weights = weights
        self.vit = vit
        self.k = k
        self.adr = adr if adr is not None else AdrState()
        self.served = 0

    def handle_uplink(self, payload: bytes) -> bytes:
        q, snr_db, params = decode_uplink(payload)
        s_a = dequantize(q)
        mask = generate_mask(s_a, self.weights, self.vit, self.k)
        self.adr.push(snr_db)
        rec = adr_step(self.adr, params)
        self.served += 1
        return encode_downlink(mask, rec)

    def handle_frame(self, data: bytes) -> bytes | None:
        """Frame-level entry point; invalid requests are dropped, not answered."""
        try:
            frame = frame_decode(data)
        except (FramingError, IntegrityError) as exc:
            log.warning("dropping bad uplink frame: %s", exc)
            return None
        if frame.msg_type is not MsgType.UPLINK_SPEC:
            log.warning("dropping unexpected message type %s", frame.msg_type)
            return None
        reply = self.handle_uplink(frame.payload)
        return frame_encode(MsgType.DOWNLINK_MASK, frame.seq, reply)


@dataclass(frozen=True)
class LossShim:
    """Extra channel impairments applied on top of the trace-driven losses."""

    drop_all: bool = False
    corrupt_seqs: frozenset[int] = frozenset()

    def drops(self, seq: int) -> bool:
        return self.drop_all

    def corrupts(self, seq: int) -> bool:
        return seq in self.corrupt_seqs


def _flip_bit(data: bytes) -> bytes:
    # flip a CRC bit so corruption surfaces as an integrity error, the same
    # signal a damaged payload would produce
    out = bytearray(data)
    out[-1] ^= 0x01
    return bytes(out)


class InProcessTransport:
    """Loopback transport: the request still passes through the frame codec."""

    def __init__(self, server: AssistServer, shim: LossShim = LossShim()):
        self.server = server
        self.shim = shim

    def request(self, payload: bytes, seq: int,
                corrupt_downlink: bool = False) -> bytes:
        if self.shim.drops(seq):
            raise DownlinkLost("shim dropped the uplink")
        reply = self.server.handle_frame(frame_encode(MsgType.UPLINK_SPEC, seq,
                                                      payload))
        if reply is None:
            raise DownlinkLost("server produced no reply")
        if corrupt_downlink or self.shim.corrupts(seq):
            reply = _flip_bit(reply)
        frame = frame_decode(reply)  # IntegrityError propagates to the caller
        return frame.payload


class UdpTransport:
    """Datagram transport with a wall-clock receive window."""

    def __init__(self, server_addr: tuple[str, int], timeout_s: float,
                 shim: LossShim = LossShim()):
        self.server_addr = server_addr
        self.timeout_s = timeout_s
        self.shim = shim
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.sock.settimeout(timeout_s)

    def close(self) -> None:
        self.sock.close()

    def request(self, payload: bytes, seq: int,
                corrupt_downlink: bool = False) -> bytes:
        if self.shim.drops(seq):
            raise DownlinkLost("shim dropped the uplink")
        self.sock.sendto(frame_encode(MsgType.UPLINK_SPEC, seq, payload),
                         self.server_addr)
        while True:
            try:
                data, _ = self.sock.recvfrom(65536)
            except socket.timeout:
                raise DownlinkLost(
                    f"no downlink within the {self.timeout_s} s window") from None
            if corrupt_downlink or self.shim.corrupts(seq):
                data = _flip_bit(data)
            frame = frame_decode(data)  # IntegrityError propagates
            if frame.msg_type is MsgType.DOWNLINK_MASK and frame.seq == seq:
                return frame.payload
            log.debug("ignoring stale frame seq=%d", frame.seq)


def serve(bind_addr: tuple[str, int], server: AssistServer,
          stop: threading.Event | None = None,
          ready: threading.Event | None = None,
          bound_addr: list | None = None) -> None:
    """Run the UDP assist server until ``stop`` is set (or forever).

    Requests are handled sequentially; ``bound_addr`` receives the actual
    (host, port) after binding, useful with port 0.
    """
    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    try:
        sock.bind(bind_addr)
        sock.settimeout(0.2)
        if bound_addr is not None:
            bound_addr.append(sock.getsockname())
        if ready is not None:
            ready.set()
        log.info("assist server listening on %s:%d", *sock.getsockname())
        while stop is None or not stop.is_set():
            try:
                data, addr = sock.recvfrom(65536)
            except socket.timeout:
                continue
            reply = server.handle_frame(data)
            if reply is not None:
                sock.sendto(reply, addr)
    finally:
        sock.close()
