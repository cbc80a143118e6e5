import json
import threading
from pathlib import Path

import pytest

from lorasound.audio import save_wav, synthesize_clip
from lorasound.cli import main
from lorasound.config import load_scenario
from lorasound.trace import ChannelTraceRow, dump_trace
from lorasound.weights import load_weights

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


def tiny_scenario_file(tmp_path: Path) -> Path:
    data = {
        "capacitor": {"capacitance_f": 0.1, "v_on": 4.0,
                      "v_off": 1.5165750888103102},
        "constants": {"e_pre_j": 0.0282, "e_sleep_j": 0.01,
                      "e_rx_j": 0.0765, "e_inf_j": 0.142},
        "accuracy_table": {"0": 0.6, "8": 0.7},
        "edge": {"r_l": 4, "r_h": 8, "t_l": 4, "t_h": 4, "p": 2, "k": 1,
                 "class_count": 2, "enc_channels": [1, 1],
                 "cls_channels": [1, 1]},
        "vit": {"p": 2, "e": 8, "blocks": 2, "heads": 2},
        "seed": 11,
    }
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(data))
    return path


@pytest.fixture
def wav_file(tmp_path):
    path = tmp_path / "clip.wav"
    path.write_bytes(save_wav(synthesize_clip(2, duration_s=0.25)))
    return path


@pytest.fixture
def trace_file(tmp_path):
    rows = [ChannelTraceRow(float(i), 4.0, i == 1, 7, 17) for i in range(3)]
    path = tmp_path / "trace.csv"
    path.write_text(dump_trace(rows))
    return path


def test_wpt_writes_csv(tmp_path, wav_file, capsys):
    assert main(["wpt", "--in", str(wav_file), "--depth", "3",
                 "--out", str(tmp_path / "out")]) == 0
    out = capsys.readouterr().out
    assert "8 bands" in out
    assert (tmp_path / "out" / "clip.wpt3.csv").exists()


def test_assist_prints_mask(tmp_path, wav_file, capsys):
    cfg = tiny_scenario_file(tmp_path)
    assert main(["assist", "--in", str(wav_file), "--ra", "8",
                 "--config", str(cfg), "--out", str(tmp_path / "out")]) == 0
    out = capsys.readouterr().out
    assert "mask" in out
    assert (tmp_path / "out" / "clip.importance.csv").exists()


def test_toa_output(tmp_path, capsys):
    cfg = tiny_scenario_file(tmp_path)
    assert main(["toa", "--payload", "64", "--sf", "7", "--ptx", "17",
                 "--config", str(cfg)]) == 0
    out = capsys.readouterr().out
    assert "0.111" in out  # (512+96)/5469 s


def test_adr_recommendation(capsys):
    assert main(["adr", "--snr", "-3", "10", "2", "--sf", "12",
                 "--ptx", "17"]) == 0
    assert "SF7 @ 14 dBm" in capsys.readouterr().out


def test_schedule_lists_options(tmp_path, capsys):
    cfg = tiny_scenario_file(tmp_path)
    assert main(["schedule", "--sf", "7", "--ptx", "17",
                 "--config", str(cfg)]) == 0
    out = capsys.readouterr().out
    assert "<- chosen" in out
    assert "R_a=8" in out


def test_init_weights_then_simulate(tmp_path, trace_file, capsys):
    cfg = tiny_scenario_file(tmp_path)
    assert main(["init-weights", "--config", str(cfg), "--out",
                 str(tmp_path)]) == 0
    weights_path = tmp_path / "weights.owt"
    assert len(load_weights(weights_path.read_bytes())) > 0

    out_dir = tmp_path / "report"
    assert main(["simulate", "--config", str(cfg), "--trace", str(trace_file),
                 "--weights", str(weights_path), "--out", str(out_dir)]) == 0
    out = capsys.readouterr().out
    assert "3 events" in out
    summary = json.loads((out_dir / "summary.json").read_text())
    assert summary["event_count"] == 3
    assert summary["paths"]["bypass_loss"] == 1


def test_simulate_with_wav_clips(tmp_path, trace_file, wav_file, capsys):
    cfg = tiny_scenario_file(tmp_path)
    assert main(["simulate", "--config", str(cfg), "--trace", str(trace_file),
                 "--clips", str(wav_file.parent)]) == 0
    assert "3 events" in capsys.readouterr().out


def test_serve_edge_processes(tmp_path, trace_file, capsys):
    """Full two-endpoint run through the CLI entry points on loopback."""
    from lorasound.config import init_weights
    from lorasound.net import AssistServer, serve

    cfg = tiny_scenario_file(tmp_path)
    scenario = load_scenario(cfg)
    weights = init_weights(scenario, scenario.seed)
    server = AssistServer(weights, scenario.vit, scenario.edge.k)
    stop = threading.Event()
    ready = threading.Event()
    bound: list = []
    thread = threading.Thread(target=serve,
                              args=(("127.0.0.1", 0), server, stop, ready, bound),
                              daemon=True)
    thread.start()
    assert ready.wait(5.0)
    host, port = bound[0]
    out_dir = tmp_path / "edge_report"
    try:
        assert main(["edge", "--server", f"{host}:{port}",
                     "--config", str(cfg), "--trace", str(trace_file),
                     "--out", str(out_dir)]) == 0
    finally:
        stop.set()
        thread.join(2.0)
    assert (out_dir / "events.csv").exists()
    assert server.served == 2  # one of the three rows is lost


def test_shipped_scenarios_simulate(tmp_path, capsys):
    trace = SCENARIO_DIR / "trace_scenario2.csv"
    assert main(["simulate", "--config", str(SCENARIO_DIR / "scenario2.json"),
                 "--trace", str(trace)]) == 0
    assert "60 events" in capsys.readouterr().out


def test_error_reporting(tmp_path, capsys):
    missing = tmp_path / "nope.json"
    missing.write_text("{not json")
    assert main(["schedule", "--sf", "7", "--config", str(missing)]) == 1
    assert "error:" in capsys.readouterr().err
