#!/usr/bin/env python3
"""Regenerate the synthetic channel traces shipped under scenarios/.

These are NOT field measurements: an SNR random walk with loss probability
tied to SNR, and ADR recommendations derived from the same walk. They exist
so the simulator has deterministic demo inputs.
"""

from pathlib import Path

import numpy as np

from lorasound.lora import AdrState, LoRaParams, adr_step
from lorasound.trace import ChannelTraceRow, dump_trace

OUT_DIR = Path(__file__).resolve().parent.parent / "scenarios"


def make_trace(seed: int, rows: int, snr_start: float, snr_span: tuple[float, float],
               loss_floor: float, start: LoRaParams) -> list[ChannelTraceRow]:
    rng = np.random.default_rng(seed)
    adr = AdrState()
    params = start
    snr = snr_start
    consecutive_losses = 0
    out = []
    for i in range(rows):
        snr = float(np.clip(snr + rng.normal(0.0, 1.6), *snr_span))
        # deeper fades lose more packets
        p_loss = loss_floor + 0.3 * max(0.0, (snr_span[0] + 5.0 - snr) / 10.0)
        lost = bool(rng.random() < p_loss)
        if lost:
            consecutive_losses += 1
            if consecutive_losses >= 2:
                # ADR backoff: unacked uplinks push the device to a slower SF
                params = LoRaParams(min(12, params.sf + 1), params.ptx_dbm)
                adr.snr_history_db.clear()
                consecutive_losses = 0
        else:
            consecutive_losses = 0
            adr.push(snr)
            params = adr_step(adr, params)
        out.append(ChannelTraceRow(t_s=60.0 * i, snr_db=round(snr, 2),
                                   packet_lost=lost, adr_sf=params.sf,
                                   adr_ptx_dbm=params.ptx_dbm))
    return out


def main() -> None:
    spec = {
        # scenario 1: 500 m urban non-line-of-sight, harsher channel
        "trace_scenario1.csv": make_trace(
            seed=101, rows=60, snr_start=-3.0, snr_span=(-12.0, 5.0),
            loss_floor=0.08, start=LoRaParams(10, 17)),
        # scenario 2: 300 m line of sight, mild channel
        "trace_scenario2.csv": make_trace(
            seed=202, rows=60, snr_start=4.0, snr_span=(-4.0, 12.0),
            loss_floor=0.03, start=LoRaParams(8, 11)),
    }
    for name, rows in spec.items():
        path = OUT_DIR / name
        path.write_text(dump_trace(rows))
        losses = sum(r.packet_lost for r in rows)
        sfs = sorted({r.adr_sf for r in rows})
        print(f"{path}: {len(rows)} rows, {losses} losses, SFs {sfs}")


if __name__ == "__main__":
    main()
