"""Command-line front end."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .attention import analyze_spectrogram
from .audio import load_wav, synthesize_clip
from .config import init_weights, load_scenario
from .errors import LorasoundError
from .harness import run_simulation, write_report
from .lora import AdrState, LoRaParams, adr_step, time_on_air, tx_energy
from .net import AssistServer, UdpTransport, serve
from .scheduler import ScheduleProblem, choose_resolution, round_energy
from .trace import load_trace
from .wavelet import dequantize, quantize, time_avg_pool, wpt_decompose
from .weights import load_weights, save_weights


def _add_common(parser: argparse.ArgumentParser, config: bool = True) -> None:
    if config:
        parser.add_argument("--config", required=True, help="scenario JSON file")
    parser.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    parser.add_argument("--out", default=None, help="output directory")


def _parse_addr(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    return host or "127.0.0.1", int(port)


def _load_clips(args, scenario) -> list:
    if getattr(args, "clips", None):
        paths = sorted(Path(args.clips).glob("*.wav"))
        if not paths:
            raise LorasoundError(f"no .wav files under {args.clips}")
        return [load_wav(p.read_bytes()) for p in paths]
    seed = args.seed if args.seed is not None else scenario.seed
    return [synthesize_clip(seed + i) for i in range(4)]


def _load_or_init_weights(args, scenario):
    if getattr(args, "weights", None):
        return load_weights(Path(args.weights).read_bytes())
    return init_weights(scenario, args.seed)


def cmd_wpt(args) -> int:
    clip = load_wav(Path(args.input).read_bytes())
    spec = wpt_decompose(clip, args.depth, args.wavelet)
    print(f"{spec.bands} bands x {spec.frames} frames "
          f"({clip.n_source_samples} samples @ {clip.sample_rate_hz} Hz)")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        path = out / (Path(args.input).stem + f".wpt{args.depth}.csv")
        np.savetxt(path, spec.values, delimiter=",", fmt="%.7g")
        print(f"wrote {path}")
    return 0


def cmd_assist(args) -> int:
    scenario = load_scenario(args.config)
    weights = _load_or_init_weights(args, scenario)
    clip = load_wav(Path(args.input).read_bytes())
    depth = args.ra.bit_length() - 1
    s_a = time_avg_pool(wpt_decompose(clip, depth, scenario.wavelet))
    s_a = dequantize(quantize(s_a))  # same view the server gets
    result = analyze_spectrogram(s_a, weights, scenario.vit, scenario.edge.k)
    print(f"mask {result.mask} (window start {result.mask.window_start}, "
          f"k={result.mask.k})")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        path = out / (Path(args.input).stem + ".importance.csv")
        np.savetxt(path, result.importance.matrix, delimiter=",", fmt="%.7g")
        print(f"wrote {path}")
    return 0


def cmd_toa(args) -> int:
    scenario = load_scenario(args.config)
    params = LoRaParams(args.sf, args.ptx)
    toa = time_on_air(args.payload, params, scenario.link)
    energy = tx_energy(params, toa, scenario.link)
    print(f"SF{params.sf} @ {params.ptx_dbm} dBm, {args.payload} B payload")
    print(f"time on air : {toa:.6f} s")
    print(f"tx energy   : {energy * 1e3:.4f} mJ")
    return 0


def cmd_adr(args) -> int:
    state = AdrState()
    for snr in args.snr:
        state.push(snr)
    rec = adr_step(state, LoRaParams(args.sf, args.ptx))
    print(f"recommended SF{rec.sf} @ {rec.ptx_dbm} dBm")
    return 0


def cmd_schedule(args) -> int:
    scenario = load_scenario(args.config)
    params = LoRaParams(args.sf, args.ptx)
    problem = ScheduleProblem(options=scenario.options, params=params,
                              link=scenario.link, constants=scenario.constants,
                              budget_j=scenario.budget_j)
    decision = choose_resolution(problem)
    print(f"budget {scenario.budget_j * 1e3:.1f} mJ at SF{args.sf} @ {args.ptx} dBm")
    for option, ok in zip(problem.options, decision.feasible):
        energy = round_energy(option, params, scenario.link, scenario.constants)
        cost = "infeasible" if not ok else f"{energy * 1e3:8.1f} mJ"
        marker = " <- chosen" if option.r_a == decision.chosen_r_a else ""
        print(f"  R_a={option.r_a:<3} payload={option.payload_bytes:<5} "
              f"acc={option.est_accuracy:.3f} {cost}{marker}")
    return 0


def cmd_simulate(args) -> int:
    scenario = load_scenario(args.config)
    trace = load_trace(Path(args.trace).read_text())
    weights = _load_or_init_weights(args, scenario)
    clips = _load_clips(args, scenario)
    report = run_simulation(scenario, trace, clips, weights)
    print(f"{report.summary['event_count']} events: "
          f"{report.summary['paths']}")
    if report.summary["mean_energy_j"] is not None:
        print(f"mean energy  {report.summary['mean_energy_j'] * 1e3:.2f} mJ")
        print(f"mean latency {report.summary['mean_latency_s']:.2f} s")
    if args.out:
        paths = write_report(report, args.out)
        print("wrote " + ", ".join(str(p) for p in paths))
    return 0


def cmd_serve(args) -> int:
    scenario = load_scenario(args.config)
    weights = _load_or_init_weights(args, scenario)
    server = AssistServer(weights, scenario.vit, scenario.edge.k)
    addr = _parse_addr(args.bind)
    print(f"serving on {addr[0]}:{addr[1]} (ctrl-c to stop)")
    try:
        serve(addr, server)
    except KeyboardInterrupt:
        print("stopped")
    return 0


def cmd_edge(args) -> int:
    scenario = load_scenario(args.config)
    trace = load_trace(Path(args.trace).read_text())
    weights = _load_or_init_weights(args, scenario)
    clips = _load_clips(args, scenario)
    transport = UdpTransport(_parse_addr(args.server),
                             timeout_s=scenario.link.rx_window_s)
    try:
        report = run_simulation(scenario, trace, clips, weights,
                                transport=transport)
    finally:
        transport.close()
    print(f"{report.summary['event_count']} events: {report.summary['paths']}")
    if args.out:
        paths = write_report(report, args.out)
        print("wrote " + ", ".join(str(p) for p in paths))
    return 0


def cmd_init_weights(args) -> int:
    scenario = load_scenario(args.config)
    store = init_weights(scenario, args.seed)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    path = out / "weights.owt"
    path.write_bytes(save_weights(store))
    print(f"wrote {path} ({len(store)} tensors)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lorasound",
        description="Cloud-assisted sound recognition co-simulator for LoRa-class links")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("wpt", help="decompose a WAV into a packet spectrogram")
    p.add_argument("--in", dest="input", required=True, help="mono 16-bit PCM WAV")
    p.add_argument("--depth", type=int, default=6)
    p.add_argument("--wavelet", choices=["haar", "db4"], default="db4")
    _add_common(p, config=False)
    p.set_defaults(func=cmd_wpt)

    p = sub.add_parser("assist", help="run the server-side band selection on a WAV")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--ra", type=int, default=8, help="assistance resolution")
    p.add_argument("--weights", help="OWT1 weight file (default: seeded init)")
    _add_common(p)
    p.set_defaults(func=cmd_assist)

    p = sub.add_parser("toa", help="time on air and Tx energy for a payload")
    p.add_argument("--payload", type=int, required=True, help="payload bytes")
    p.add_argument("--sf", type=int, required=True)
    p.add_argument("--ptx", type=int, default=17)
    _add_common(p)
    p.set_defaults(func=cmd_toa)

    p = sub.add_parser("adr", help="one ADR recommendation from SNR history")
    p.add_argument("--snr", type=float, nargs="+", required=True)
    p.add_argument("--sf", type=int, required=True)
    p.add_argument("--ptx", type=int, required=True)
    p.set_defaults(func=cmd_adr)

    p = sub.add_parser("schedule", help="show the resolution decision for given params")
    p.add_argument("--sf", type=int, required=True)
    p.add_argument("--ptx", type=int, default=17)
    _add_common(p)
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("simulate", help="run the in-process trace simulation")
    p.add_argument("--trace", required=True, help="channel trace CSV")
    p.add_argument("--clips", help="directory of WAV clips (default: synthetic)")
    p.add_argument("--weights", help="OWT1 weight file (default: seeded init)")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("serve", help="run the UDP assist server")
    p.add_argument("--bind", default="127.0.0.1:9378")
    p.add_argument("--weights", help="OWT1 weight file (default: seeded init)")
    _add_common(p)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("edge", help="run the edge simulation against a remote server")
    p.add_argument("--server", required=True, help="host:port of the assist server")
    p.add_argument("--trace", required=True)
    p.add_argument("--clips")
    p.add_argument("--weights")
    _add_common(p)
    p.set_defaults(func=cmd_edge)

    p = sub.add_parser("init-weights", help="write a seeded OWT1 weight file")
    _add_common(p)
    p.set_defaults(func=cmd_init_weights)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except LorasoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
