"""Cloud-assisted environmental sound recognition over LoRa-class links.

A desk-scale, trace-driven co-simulator: wavelet packet spectrograms,
attention-rollout band selection on the server, multi-resolution inference
on the edge, a LoRa link/energy model with ADR, and the resource-aware
adaptive-resolution scheduler, runnable in-process or as an edge/server
pair over UDP.
"""

__version__ = "0.1.0"

from .audio import AudioClip, load_wav, synthesize_clip
from .attention import (SpectralAttentionMask, VitConfig, generate_mask,
                        select_band_window)
from .config import ScenarioConfig, init_weights, load_scenario
from .edge import EdgeModelConfig, multi_res_forward, single_res_forward
from .harness import EventMetrics, run_event, run_simulation, write_report
from .lora import (AdrState, CapacitorSpec, LinkConfig, LoRaParams, adr_step,
                   capacitor_energy, frame_decode, frame_encode, rx_energy,
                   time_on_air, tx_energy)
from .scheduler import (EnergyConstants, ResolutionOption, ScheduleProblem,
                        choose_resolution, round_energy)
from .tensor import Tensor
from .trace import ChannelTraceRow, load_trace
from .wavelet import (AssistSpectrogram, WptSpectrogram, refine_bands,
                      time_avg_pool, wpt_decompose, wpt_reconstruct)
from .weights import WeightStore, load_weights, save_weights

__all__ = [
    "AudioClip", "load_wav", "synthesize_clip",
    "SpectralAttentionMask", "VitConfig", "generate_mask", "select_band_window",
    "ScenarioConfig", "init_weights", "load_scenario",
    "EdgeModelConfig", "multi_res_forward", "single_res_forward",
    "EventMetrics", "run_event", "run_simulation", "write_report",
    "AdrState", "CapacitorSpec", "LinkConfig", "LoRaParams", "adr_step",
    "capacitor_energy", "frame_decode", "frame_encode", "rx_energy",
    "time_on_air", "tx_energy",
    "EnergyConstants", "ResolutionOption", "ScheduleProblem",
    "choose_resolution", "round_energy",
    "Tensor", "ChannelTraceRow", "load_trace",
    "AssistSpectrogram", "WptSpectrogram", "refine_bands", "time_avg_pool",
    "wpt_decompose", "wpt_reconstruct",
    "WeightStore", "load_weights", "save_weights",
]
