"""Trace-driven co-simulation: the per-event offload workflow and aggregation.

Each trace row drives one power cycle: restore parameters, schedule the
assistance resolution, uplink the quantized spectrogram (unless bypassing),
and run either the Multi-Res or the Single-Res classifier depending on
whether a valid mask came back. Lost or corrupt downlinks are never
retransmitted; the event falls back to local inference.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

from .attention import SpectralAttentionMask
from .audio import AudioClip
from .config import ScenarioConfig
from .edge import ClassScores, multi_res_forward, single_res_forward
from .errors import (ConfigError, DecodeError, DownlinkLost, FramingError,
                     IntegrityError, MaskValidationError)
from .lora import (FRAME_OVERHEAD_BYTES, LoRaParams, Phase, PowerCycleState,
                   PowerEvent, power_cycle_advance, time_on_air, tx_energy)
from .net import (AssistServer, InProcessTransport, decode_downlink,
                  encode_uplink)
from .scheduler import ScheduleProblem, choose_resolution
from .trace import ChannelTraceRow
from .wavelet import low_res_spectrogram, quantize, refine_bands, time_avg_pool, \
    wpt_decompose
from .weights import WeightStore

__all__ = ["EventMetrics", "SimulationReport", "run_event", "run_simulation",
           "write_report", "EVENT_FIELDS"]

PATH_ASSISTED = "assisted"
PATH_BYPASS_SCHEDULED = "bypass_scheduled"
PATH_BYPASS_LOSS = "bypass_loss"
PATH_FAILED_POWER = "failed_power"

EVENT_FIELDS = [
    "event_id", "chosen_r_a", "payload_bytes", "path",
    "energy_pre_j", "energy_tx_j", "energy_sleep_j", "energy_rx_j",
    "energy_inf_j", "energy_total_j", "latency_s", "predicted_class",
    "mask_bits", "retransmissions", "rec_sf", "rec_ptx_dbm",
]

# failure injection may interrupt any of these, in cycle order
_FAILABLE_PHASES = (Phase.PREPROCESS, Phase.TX, Phase.SLEEP, Phase.RX,
                    Phase.INFERENCE)


@dataclass(frozen=True)
class EventMetrics:
    event_id: int
    chosen_r_a: int
    payload_bytes: int
    path: str
    energy_pre_j: float
    energy_tx_j: float
    energy_sleep_j: float
    energy_rx_j: float
    energy_inf_j: float
    end_to_end_latency_s: float
    predicted_class: int | None
    mask_bits: str
    retransmissions: int
    rec_sf: int | None
    rec_ptx_dbm: int | None
    class_scores: tuple[float, ...] = ()

    @property
    def energy_total_j(self) -> float:
        return (self.energy_pre_j + self.energy_tx_j + self.energy_sleep_j
                + self.energy_rx_j + self.energy_inf_j)


def _local_prediction(clip: AudioClip, scenario: ScenarioConfig,
                      weights: WeightStore) -> ClassScores:
    low = low_res_spectrogram(clip, scenario.edge.r_l, scenario.edge.t_l,
                              scenario.wavelet)
    return single_res_forward(low, weights, scenario.edge)


def default_transport(scenario: ScenarioConfig,
                      weights: WeightStore) -> InProcessTransport:
    server = AssistServer(weights, scenario.vit, scenario.edge.k)
    return InProcessTransport(server)


def run_event(scenario: ScenarioConfig, row: ChannelTraceRow, clip: AudioClip,
              weights: WeightStore, *, transport=None, event_id: int = 0,
              params: LoRaParams | None = None, corrupt_downlink: bool = False,
              fail_in_phase: Phase | None = None) -> EventMetrics:
    """Execute one offload round and account its energy and latency.

    ``params`` defaults to the trace row's replayed ADR recommendation.
    ``fail_in_phase`` simulates a power failure entering that phase: earlier
    phases keep their energy charge, the round yields no prediction, and the
    path is reported as failed_power.
    """
    if fail_in_phase is not None and fail_in_phase not in _FAILABLE_PHASES:
        raise ValueError(f"cannot inject a failure in phase {fail_in_phase}")
    if transport is None:
        transport = default_transport(scenario, weights)
    if params is None:
        params = LoRaParams(row.adr_sf, row.adr_ptx_dbm)
    problem = ScheduleProblem(options=scenario.options, params=params,
                              link=scenario.link, constants=scenario.constants,
                              budget_j=scenario.budget_j)
    decision = choose_resolution(problem)
    r_a = decision.chosen_r_a
    uplink = r_a > 0
    con = scenario.constants
    lat = scenario.latency

    energy = {"pre": 0.0, "tx": 0.0, "sleep": 0.0, "rx": 0.0, "inf": 0.0}
    latency = 0.0
    mask: SpectralAttentionMask | None = None
    rec: LoRaParams | None = None

    def metrics(path: str, scores: ClassScores | None) -> EventMetrics:
        total = sum(energy.values())
        recharge = total / scenario.harvest_power_w
        return EventMetrics(
            event_id=event_id, chosen_r_a=r_a,
            payload_bytes=r_a * r_a, path=path,
            energy_pre_j=energy["pre"], energy_tx_j=energy["tx"],
            energy_sleep_j=energy["sleep"], energy_rx_j=energy["rx"],
            energy_inf_j=energy["inf"],
            end_to_end_latency_s=recharge + latency,
            predicted_class=scores.predicted if scores else None,
            mask_bits=str(mask) if path == PATH_ASSISTED else "",
            retransmissions=0,
            rec_sf=rec.sf if rec else None,
            rec_ptx_dbm=rec.ptx_dbm if rec else None,
            class_scores=tuple(float(v) for v in scores.probs) if scores else (),
        )

    def failed(phase: Phase) -> bool:
        return fail_in_phase is phase

    if failed(Phase.PREPROCESS):
        return metrics(PATH_FAILED_POWER, None)
    energy["pre"] = con.e_pre
    latency += lat.preprocess_s

    reply_payload: bytes | None = None
    if uplink:
        depth = r_a.bit_length() - 1
        s_a = time_avg_pool(wpt_decompose(clip, depth, scenario.wavelet))
        up = encode_uplink(quantize(s_a), row.snr_db, params)
        frame_bytes = FRAME_OVERHEAD_BYTES + len(up)
        if frame_bytes > scenario.link.max_payload_bytes[params.sf]:
            raise ConfigError(
                f"uplink frame of {frame_bytes} B (cells plus metadata) exceeds "
                f"the {scenario.link.max_payload_bytes[params.sf]} B limit at "
                f"SF{params.sf}; shrink R_a options or raise the frame limit")
        toa = time_on_air(r_a * r_a, params, scenario.link)
        if failed(Phase.TX):
            return metrics(PATH_FAILED_POWER, None)
        energy["tx"] = tx_energy(params, toa, scenario.link)
        latency += toa
        if not row.packet_lost:
            # the uplink reached the gateway; the reply is consumed after Rx
            try:
                reply_payload = transport.request(up, event_id & 0xFFFF,
                                                  corrupt_downlink)
            except (DownlinkLost, IntegrityError, FramingError):
                reply_payload = None
        if failed(Phase.SLEEP):
            return metrics(PATH_FAILED_POWER, None)
        energy["sleep"] = con.e_sleep
        latency += lat.sleep_s
        if failed(Phase.RX):
            return metrics(PATH_FAILED_POWER, None)
        energy["rx"] = con.e_rx
        latency += scenario.link.rx_window_s
        if reply_payload is not None:
            try:
                mask, rec = decode_downlink(reply_payload, scenario.vit.p)
            except (DecodeError, MaskValidationError):
                mask = None
            if mask is not None and mask.k != scenario.edge.k:
                mask = None  # disagreeing k: invalid mask, fall back

    if failed(Phase.INFERENCE):
        return metrics(PATH_FAILED_POWER, None)
    energy["inf"] = con.e_inf
    latency += lat.inference_s
    if mask is not None:
        mri = refine_bands(clip, mask, scenario.edge.r_l, scenario.edge.r_h,
                           scenario.edge.t_l, scenario.edge.t_h, scenario.wavelet)
        return metrics(PATH_ASSISTED, multi_res_forward(mri, weights, scenario.edge))
    scores = _local_prediction(clip, scenario, weights)
    if uplink:
        return metrics(PATH_BYPASS_LOSS, scores)
    return metrics(PATH_BYPASS_SCHEDULED, scores)


@dataclass(frozen=True)
class SimulationReport:
    events: tuple[EventMetrics, ...]
    summary: dict


def _summarize(events: tuple[EventMetrics, ...]) -> dict:
    counts = {PATH_ASSISTED: 0, PATH_BYPASS_SCHEDULED: 0,
              PATH_BYPASS_LOSS: 0, PATH_FAILED_POWER: 0}
    histogram: dict[str, int] = {}
    for m in events:
        counts[m.path] += 1
        key = str(m.payload_bytes)
        histogram[key] = histogram.get(key, 0) + 1
    n = len(events)
    return {
        "event_count": n,
        "paths": counts,
        "mean_energy_j": (sum(m.energy_total_j for m in events) / n) if n else None,
        "mean_latency_s": (sum(m.end_to_end_latency_s for m in events) / n) if n else None,
        "total_energy_j": sum(m.energy_total_j for m in events),
        "payload_histogram": histogram,
        "retransmissions": sum(m.retransmissions for m in events),
    }


def run_simulation(scenario: ScenarioConfig, trace: list[ChannelTraceRow],
                   clips: list[AudioClip], weights: WeightStore,
                   transport=None) -> SimulationReport:
    """Run one event per trace row, cycling through the supplied clips.

    In "trace" ADR mode each row replays its recorded parameters; in
    "computed" mode the power-cycle state machine checkpoints the server's
    downlink recommendations between rounds.
    """
    if trace and not clips:
        raise ConfigError("need at least one audio clip")
    if transport is None:
        transport = default_transport(scenario, weights)
    computed = scenario.adr_mode == "computed"
    state = None
    if computed and trace:
        initial = LoRaParams(trace[0].adr_sf, trace[0].adr_ptx_dbm)
        state = PowerCycleState(checkpointed_params=initial,
                                volatile_params=initial)
    events = []
    for i, row in enumerate(trace):
        clip = clips[i % len(clips)]
        if computed:
            state = power_cycle_advance(state, PowerEvent.WAKE)
            params = state.volatile_params
        else:
            params = LoRaParams(row.adr_sf, row.adr_ptx_dbm)
        m = run_event(scenario, row, clip, weights, transport=transport,
                      event_id=i, params=params)
        if computed:
            if m.rec_sf is not None:
                state = state.with_volatile(LoRaParams(m.rec_sf, m.rec_ptx_dbm))
            while state.phase is not Phase.OFF:
                state = power_cycle_advance(state, PowerEvent.PHASE_DONE)
        events.append(m)
    events = tuple(events)
    return SimulationReport(events=events, summary=_summarize(events))


def _format_cell(value) -> str:
    if value is None:
        return ""
    return str(value)


def events_csv(report: SimulationReport) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(EVENT_FIELDS)
    for m in report.events:
        writer.writerow([_format_cell(v) for v in (
            m.event_id, m.chosen_r_a, m.payload_bytes, m.path,
            m.energy_pre_j, m.energy_tx_j, m.energy_sleep_j, m.energy_rx_j,
            m.energy_inf_j, m.energy_total_j, m.end_to_end_latency_s,
            m.predicted_class, m.mask_bits, m.retransmissions,
            m.rec_sf, m.rec_ptx_dbm)])
    return out.getvalue()


def summary_json(report: SimulationReport) -> str:
    return json.dumps(report.summary, indent=2, sort_keys=True) + "\n"


def scores_csv(report: SimulationReport) -> str:
    """Per-event class probability vectors (empty rows for failed rounds)."""
    width = max((len(m.class_scores) for m in report.events), default=0)
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["event_id"] + [f"class_{i}" for i in range(width)])
    for m in report.events:
        row = list(m.class_scores) + [""] * (width - len(m.class_scores))
        writer.writerow([m.event_id] + row)
    return out.getvalue()


def write_report(report: SimulationReport, out_dir: str | Path
                 ) -> tuple[Path, Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    events_path = out / "events.csv"
    summary_path = out / "summary.json"
    scores_path = out / "scores.csv"
    events_path.write_text(events_csv(report))
    summary_path.write_text(summary_json(report))
    scores_path.write_text(scores_csv(report))
    return events_path, summary_path, scores_path
