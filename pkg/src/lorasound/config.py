"""Scenario configuration: one JSON document wiring every subsystem together."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .attention import VitConfig, init_vit_weights
from .edge import EdgeModelConfig, init_edge_weights
from .errors import ConfigError
from .lora import CapacitorSpec, LinkConfig, capacitor_energy
from .scheduler import EnergyConstants, ResolutionOption
from .wavelet import DEFAULT_WAVELET
from .weights import WeightStore

__all__ = ["LatencyModel", "ScenarioConfig", "load_scenario", "scenario_from_dict",
           "init_weights"]


@dataclass(frozen=True)
class LatencyModel:
    """Fixed per-phase latencies in seconds; uplink ToA is computed per event."""

    preprocess_s: float = 4.0
    sleep_s: float = 1.0
    inference_s: float = 20.1


@dataclass(frozen=True)
class ScenarioConfig:
    capacitor: CapacitorSpec
    link: LinkConfig
    constants: EnergyConstants
    options: tuple[ResolutionOption, ...]
    edge: EdgeModelConfig
    vit: VitConfig
    latency: LatencyModel = LatencyModel()
    wavelet: str = DEFAULT_WAVELET
    harvest_power_w: float = 0.012
    seed: int = 0
    adr_mode: str = "trace"  # "trace" replays rows; "computed" runs adr_step

    def __post_init__(self):
        if self.harvest_power_w <= 0:
            raise ConfigError("harvest power must be positive")
        if self.adr_mode not in ("trace", "computed"):
            raise ConfigError(f"unknown adr_mode {self.adr_mode!r}")
        if self.edge.p != self.vit.p:
            raise ConfigError(
                f"edge and transformer disagree on p: {self.edge.p} vs {self.vit.p}")
        for option in self.options:
            if option.r_a == 0:
                continue
            if option.r_a % self.vit.p != 0:
                raise ConfigError(
                    f"p={self.vit.p} does not divide option R_a={option.r_a}")
        if capacitor_energy(self.capacitor) < (self.constants.e_pre
                                               + self.constants.e_inf):
            raise ConfigError("budget cannot cover even a local bypass round")

    @property
    def budget_j(self) -> float:
        return capacitor_energy(self.capacitor)

    def assist_resolutions(self) -> list[int]:
        return sorted(o.r_a for o in self.options if o.r_a > 0)


def _take(data: dict, key: str, kind):
    if key not in data:
        raise ConfigError(f"missing config key {key!r}")
    return kind(data[key])


def scenario_from_dict(data: dict) -> ScenarioConfig:
    """Build and cross-validate a scenario from parsed JSON."""
    try:
        cap = data["capacitor"]
        capacitor = CapacitorSpec(float(cap["capacitance_f"]),
                                  float(cap["v_on"]), float(cap["v_off"]))
        link_raw = dict(data.get("link", {}))
        for table in ("data_rate_bps", "max_payload_bytes"):
            if table in link_raw:
                link_raw[table] = {int(k): int(v)
                                   for k, v in link_raw[table].items()}
        link = LinkConfig(**link_raw)
        con = data["constants"]
        constants = EnergyConstants(
            e_pre=float(con["e_pre_j"]), e_sleep=float(con["e_sleep_j"]),
            e_rx=float(con["e_rx_j"]), e_inf=float(con["e_inf_j"]))
        table = {int(k): float(v) for k, v in data["accuracy_table"].items()}
        options = tuple(ResolutionOption(r_a, acc)
                        for r_a, acc in sorted(table.items()))
        edge = EdgeModelConfig(**{k: tuple(v) if isinstance(v, list) else v
                                  for k, v in data.get("edge", {}).items()})
        vit = VitConfig(**data.get("vit", {}))
        latency = LatencyModel(**data.get("latency", {}))
        return ScenarioConfig(
            capacitor=capacitor, link=link, constants=constants, options=options,
            edge=edge, vit=vit, latency=latency,
            wavelet=data.get("wavelet", DEFAULT_WAVELET),
            harvest_power_w=float(data.get("harvest_power_w", 0.012)),
            seed=int(data.get("seed", 0)),
            adr_mode=data.get("adr_mode", "trace"),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid scenario config: {exc}") from exc


def load_scenario(path: str | Path) -> ScenarioConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON: {exc}") from None
    return scenario_from_dict(data)


def init_weights(scenario: ScenarioConfig, seed: int | None = None) -> WeightStore:
    """One seeded store holding the transformer, edge model, and encoding bank."""
    seed = scenario.seed if seed is None else seed
    patch_sizes = [scenario.vit.patch_size(r) for r in scenario.assist_resolutions()]
    if not patch_sizes:
        patch_sizes = [1]
    merged = WeightStore()
    for name, tensor in init_vit_weights(scenario.vit, patch_sizes, seed).items():
        merged.add(name, tensor)
    for name, tensor in init_edge_weights(scenario.edge, seed + 1).items():
        merged.add(name, tensor)
    return merged
