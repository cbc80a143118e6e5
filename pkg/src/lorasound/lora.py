"""LoRa link and energy model.

Covers the per-SF data-rate table, the linear time-on-air model (with the
symbol-exact variant behind a config switch), transmit/receive energy,
capacitor budgets, the generic server-side ADR step, CRC-16 framed payloads,
and the intermittent power-cycle state machine with parameter checkpointing.
"""

from __future__ import annotations

import enum
import math
import struct
from collections import deque
from dataclasses import dataclass, field, replace

from .errors import (FramingError, InfeasiblePayloadError, IntegrityError,
                     StateMachineError)

__all__ = [
    "SF_RANGE",
    "PTX_RANGE_DBM",
    "LoRaParams",
    "LinkConfig",
    "CapacitorSpec",
    "capacitor_energy",
    "time_on_air",
    "tx_energy",
    "rx_energy",
    "AdrState",
    "adr_step",
    "crc16_ccitt_false",
    "MsgType",
    "Frame",
    "frame_encode",
    "frame_decode",
    "FRAME_OVERHEAD_BYTES",
    "Phase",
    "PowerEvent",
    "PowerCycleState",
    "power_cycle_advance",
]

SF_RANGE = (7, 12)
PTX_RANGE_DBM = (5, 17)

# 125 kHz, CR 4/5 LoRaWAN conventions
DEFAULT_DATA_RATE_BPS = {7: 5469, 8: 3125, 9: 1758, 10: 977, 11: 537, 12: 293}
DEFAULT_MAX_PAYLOAD_BYTES = {7: 222, 8: 222, 9: 115, 10: 51, 11: 51, 12: 51}
DEFAULT_REQUIRED_SNR_DB = {7: -7.5, 8: -10.0, 9: -12.5, 10: -15.0,
                           11: -17.5, 12: -20.0}

# the published data-rate band is quoted to 0.1 kbps
DR_BAND_KBPS = (0.3, 5.5)


@dataclass(frozen=True)
class LoRaParams:
    sf: int
    ptx_dbm: int

    def __post_init__(self):
        if not SF_RANGE[0] <= self.sf <= SF_RANGE[1]:
            raise ValueError(f"spreading factor {self.sf} outside {SF_RANGE}")
        if not PTX_RANGE_DBM[0] <= self.ptx_dbm <= PTX_RANGE_DBM[1]:
            raise ValueError(f"Tx power {self.ptx_dbm} dBm outside {PTX_RANGE_DBM}")


@dataclass(frozen=True)
class LinkConfig:
    data_rate_bps: dict[int, int] = field(
        default_factory=lambda: dict(DEFAULT_DATA_RATE_BPS))
    preamble_bits: int = 96
    max_payload_bytes: dict[int, int] = field(
        default_factory=lambda: dict(DEFAULT_MAX_PAYLOAD_BYTES))
    rx_power_w: float = 0.03825
    rx_window_s: float = 2.0
    pa_efficiency: float = 1.0
    toa_model: str = "linear"      # or "semtech"
    bandwidth_hz: int = 125_000    # symbol-exact model only
    coding_rate: int = 1           # CR 4/(4+coding_rate)
    preamble_symbols: int = 8

    def __post_init__(self):
        sfs = list(range(SF_RANGE[0], SF_RANGE[1] + 1))
        for sf in sfs:
            if sf not in self.data_rate_bps or sf not in self.max_payload_bytes:
                raise ValueError(f"link tables must cover SF{sf}")
        rates = [self.data_rate_bps[sf] for sf in sfs]
        if any(a <= b for a, b in zip(rates, rates[1:])):
            raise ValueError("data rate must be strictly decreasing in SF")
        lo, hi = min(rates) / 1000.0, max(rates) / 1000.0
        if round(lo, 1) < DR_BAND_KBPS[0] or round(hi, 1) > DR_BAND_KBPS[1]:
            raise ValueError(
                f"data-rate endpoints {lo:.3f}-{hi:.3f} kbps leave the "
                f"{DR_BAND_KBPS[0]}-{DR_BAND_KBPS[1]} kbps band")
        if not 0.0 < self.pa_efficiency <= 1.0:
            raise ValueError("PA efficiency must be in (0, 1]")
        if self.toa_model not in ("linear", "semtech"):
            raise ValueError(f"unknown ToA model {self.toa_model!r}")


@dataclass(frozen=True)
class CapacitorSpec:
    capacitance_f: float
    v_on: float
    v_off: float

    def __post_init__(self):
        if self.capacitance_f <= 0:
            raise ValueError("capacitance must be positive")
        # equality gives a zero-budget capacitor; scenario validation rejects
        # budgets that cannot cover a bypass round
        if not self.v_on >= self.v_off >= 0:
            raise ValueError("need V_on >= V_off >= 0")


def capacitor_energy(spec: CapacitorSpec) -> float:
    """Per-power-cycle budget: C/2 * (V_on^2 - V_off^2), in joules."""
    return 0.5 * spec.capacitance_f * (spec.v_on ** 2 - spec.v_off ** 2)


def _semtech_toa(payload_bytes: int, params: LoRaParams, link: LinkConfig) -> float:
    sf = params.sf
    t_sym = (1 << sf) / link.bandwidth_hz
    de = 1 if sf >= 11 else 0  # low-data-rate optimization
    num = 8 * payload_bytes - 4 * sf + 28 + 16
    n_payload = 8 + max(math.ceil(num / (4 * (sf - 2 * de))) * (link.coding_rate + 4), 0)
    t_preamble = (link.preamble_symbols + 4.25) * t_sym
    return t_preamble + n_payload * t_sym


def time_on_air(payload_bytes: int, params: LoRaParams, link: LinkConfig) -> float:
    """Uplink duration in seconds: (8*payload + preamble_bits) / data_rate.

    The default linear model matches the scheduler's cost abstraction; the
    "semtech" model computes the symbol-exact duration instead.
    """
    if payload_bytes < 0:
        raise ValueError("payload must be non-negative")
    limit = link.max_payload_bytes[params.sf]
    if payload_bytes > limit:
        raise InfeasiblePayloadError(
            f"{payload_bytes} B exceeds the {limit} B limit at SF{params.sf}")
    if link.toa_model == "semtech":
        return _semtech_toa(payload_bytes, params, link)
    return (8 * payload_bytes + link.preamble_bits) / link.data_rate_bps[params.sf]


def tx_energy(params: LoRaParams, toa_s: float, link: LinkConfig) -> float:
    """Transmit energy in joules: radiated power (dBm -> W) over PA efficiency."""
    watts = 10.0 ** (params.ptx_dbm / 10.0) / 1000.0
    return watts / link.pa_efficiency * toa_s


def rx_energy(link: LinkConfig) -> float:
    """Downlink window energy in joules: P_Rx * T_Rx."""
    return link.rx_power_w * link.rx_window_s


@dataclass
class AdrState:
    """Server-side sliding SNR window and the margin tables for ADR."""

    window: int = 20
    device_margin_db: float = 10.0
    step_db: float = 3.0
    required_snr_db: dict[int, float] = field(
        default_factory=lambda: dict(DEFAULT_REQUIRED_SNR_DB))
    snr_history_db: deque = field(default_factory=deque)

    def __post_init__(self):
        self.snr_history_db = deque(self.snr_history_db, maxlen=self.window)
        sfs = sorted(self.required_snr_db)
        vals = [self.required_snr_db[sf] for sf in sfs]
        if any(a <= b for a, b in zip(vals, vals[1:])):
            raise ValueError("required SNR must be strictly decreasing in SF")

    def push(self, snr_db: float) -> None:
        self.snr_history_db.append(snr_db)


def adr_step(state: AdrState, current: LoRaParams) -> LoRaParams:
    """One pass of the generic LoRaWAN ADR parameter recommendation.

    margin = max(history) - required_snr(SF) - device_margin, stepped in
    units of step_db: positive steps first lower SF to 7, then Tx power down
    to 5 dBm; negative steps raise Tx power up to 17 dBm.
    """
    if not state.snr_history_db:
        raise ValueError("ADR needs at least one SNR observation")
    margin = (max(state.snr_history_db)
              - state.required_snr_db[current.sf]
              - state.device_margin_db)
    n_step = math.floor(margin / state.step_db)
    sf, ptx = current.sf, current.ptx_dbm
    while n_step > 0:
        if sf > SF_RANGE[0]:
            sf -= 1
        else:
            ptx = max(PTX_RANGE_DBM[0], ptx - 3)
        n_step -= 1
    while n_step < 0:
        ptx = min(PTX_RANGE_DBM[1], ptx + 3)
        n_step += 1
    return LoRaParams(sf, ptx)


def _make_crc_table() -> list[int]:
    table = []
    for byte in range(256):
        crc = byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ 0x1021 if crc & 0x8000 else crc << 1) & 0xFFFF
        table.append(crc)
    return table


_CRC_TABLE = _make_crc_table()


def crc16_ccitt_false(data: bytes) -> int:
    """CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, no xorout."""
    crc = 0xFFFF
    for b in data:
        crc = ((crc << 8) & 0xFFFF) ^ _CRC_TABLE[(crc >> 8) ^ b]
    return crc


class MsgType(enum.IntEnum):
    UPLINK_SPEC = 0x01
    DOWNLINK_MASK = 0x02


FRAME_MAGIC = 0xA5
FRAME_VERSION = 1
FRAME_OVERHEAD_BYTES = 8  # magic, version, type, seq(2), len, crc(2)
_HEADER = struct.Struct(">BBBHB")  # multi-byte fields in network byte order


@dataclass(frozen=True)
class Frame:
    msg_type: MsgType
    seq: int
    payload: bytes


def frame_encode(msg_type: MsgType, seq: int, payload: bytes) -> bytes:
    if len(payload) > 0xFF:
        raise FramingError(f"payload of {len(payload)} B exceeds the u8 length field")
    if not 0 <= seq <= 0xFFFF:
        raise FramingError(f"sequence number {seq} out of u16 range")
    head = _HEADER.pack(FRAME_MAGIC, FRAME_VERSION, int(msg_type), seq,
                        len(payload))
    body = head + payload
    return body + struct.pack(">H", crc16_ccitt_false(body))


def frame_decode(buf: bytes) -> Frame:
    """Decode and verify one frame; CRC mismatch raises IntegrityError."""
    if len(buf) < FRAME_OVERHEAD_BYTES:
        raise FramingError(f"frame of {len(buf)} B is shorter than the "
                           f"{FRAME_OVERHEAD_BYTES} B minimum")
    magic, version, raw_type, seq, length = _HEADER.unpack_from(buf)
    if magic != FRAME_MAGIC:
        raise FramingError(f"bad frame magic 0x{magic:02X}")
    if version != FRAME_VERSION:
        raise FramingError(f"unsupported frame version {version}")
    if len(buf) != FRAME_OVERHEAD_BYTES + length:
        raise FramingError(
            f"frame length {len(buf)} != header-declared {FRAME_OVERHEAD_BYTES + length}")
    body, (crc,) = buf[:-2], struct.unpack(">H", buf[-2:])
    if crc16_ccitt_false(body) != crc:
        raise IntegrityError("frame CRC mismatch")
    try:
        msg_type = MsgType(raw_type)
    except ValueError:
        raise FramingError(f"unknown message type 0x{raw_type:02X}") from None
    return Frame(msg_type, seq, bytes(buf[_HEADER.size:-2]))


class Phase(enum.Enum):
    OFF = "off"
    RESTORE = "restore"
    PREPROCESS = "preprocess"
    TX = "tx"
    SLEEP = "sleep"
    RX = "rx"
    INFERENCE = "inference"
    CHECKPOINT = "checkpoint"


_PHASE_ORDER = [Phase.RESTORE, Phase.PREPROCESS, Phase.TX, Phase.SLEEP,
                Phase.RX, Phase.INFERENCE, Phase.CHECKPOINT]


class PowerEvent(enum.Enum):
    WAKE = "wake"
    PHASE_DONE = "phase_done"
    POWER_FAIL = "power_fail"


@dataclass(frozen=True)
class PowerCycleState:
    """Intermittent execution state; checkpointed params survive power loss."""

    phase: Phase = Phase.OFF
    checkpointed_params: LoRaParams = LoRaParams(12, 17)
    volatile_params: LoRaParams = LoRaParams(12, 17)
    last_round_complete: bool = False

    def with_volatile(self, params: LoRaParams) -> "PowerCycleState":
        """Apply an in-flight parameter update (e.g. a downlink ADR recommendation)."""
        return replace(self, volatile_params=params)


def power_cycle_advance(state: PowerCycleState,
                        event: PowerEvent) -> PowerCycleState:
    """Advance the wake/restore/.../checkpoint/off cycle by one event.

    power_fail is legal in every phase and drops to OFF without writing the
    checkpoint; the interrupted round is marked incomplete.
    """
    if event is PowerEvent.POWER_FAIL:
        return replace(state, phase=Phase.OFF, last_round_complete=False)
    if event is PowerEvent.WAKE:
        if state.phase is not Phase.OFF:
            raise StateMachineError(f"wake is illegal in phase {state.phase.value}")
        return replace(state, phase=Phase.RESTORE,
                       volatile_params=state.checkpointed_params)
    if event is PowerEvent.PHASE_DONE:
        if state.phase is Phase.OFF:
            raise StateMachineError("phase_done is illegal while off")
        if state.phase is Phase.CHECKPOINT:
            return replace(state, phase=Phase.OFF,
                           checkpointed_params=state.volatile_params,
                           last_round_complete=True)
        nxt = _PHASE_ORDER[_PHASE_ORDER.index(state.phase) + 1]
        return replace(state, phase=nxt)
    raise StateMachineError(f"unknown event {event!r}")
