"""Channel trace CSV ingestion: per-event SNR, loss flag, and ADR replay."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

from .errors import TraceError
from .lora import PTX_RANGE_DBM, SF_RANGE

HEADER = ["t_s", "snr_db", "packet_lost", "adr_sf", "adr_ptx_dbm"]

_TRUE = {"1", "true"}
_FALSE = {"0", "false"}


@dataclass(frozen=True)
class ChannelTraceRow:
    t_s: float
    snr_db: float
    packet_lost: bool
    adr_sf: int
    adr_ptx_dbm: int

    def __post_init__(self):
        if not SF_RANGE[0] <= self.adr_sf <= SF_RANGE[1]:
            raise TraceError(f"adr_sf {self.adr_sf} outside {SF_RANGE}")
        if not PTX_RANGE_DBM[0] <= self.adr_ptx_dbm <= PTX_RANGE_DBM[1]:
            raise TraceError(f"adr_ptx_dbm {self.adr_ptx_dbm} outside {PTX_RANGE_DBM}")


def _parse_bool(text: str, line: int) -> bool:
    low = text.strip().lower()
    if low in _TRUE:
        return True
    if low in _FALSE:
        return False
    raise TraceError(f"line {line}: packet_lost must be 0/1/true/false, got {text!r}")


def load_trace(text: str) -> list[ChannelTraceRow]:
    """Parse and validate a trace CSV; errors carry the 1-based line number."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise TraceError("empty trace: missing header") from None
    if [h.strip() for h in header] != HEADER:
        raise TraceError(f"line 1: header must be {','.join(HEADER)}")
    rows: list[ChannelTraceRow] = []
    for line, record in enumerate(reader, start=2):
        if not record or (len(record) == 1 and not record[0].strip()):
            continue
        if len(record) != len(HEADER):
            raise TraceError(f"line {line}: expected {len(HEADER)} fields, "
                             f"got {len(record)}")
        try:
            row = ChannelTraceRow(
                t_s=float(record[0]),
                snr_db=float(record[1]),
                packet_lost=_parse_bool(record[2], line),
                adr_sf=int(record[3]),
                adr_ptx_dbm=int(record[4]),
            )
        except TraceError:
            raise
        except ValueError as exc:
            raise TraceError(f"line {line}: {exc}") from None
        if rows and row.t_s <= rows[-1].t_s:
            raise TraceError(
                f"line {line}: t_s {row.t_s} does not increase past {rows[-1].t_s}")
        rows.append(row)
    return rows


def dump_trace(rows: list[ChannelTraceRow]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(HEADER)
    for row in rows:
        writer.writerow([row.t_s, row.snr_db, int(row.packet_lost),
                         row.adr_sf, row.adr_ptx_dbm])
    return out.getvalue()
