import numpy as np
import pytest

from lorasound.attention import VitConfig
from lorasound.audio import synthesize_clip
from lorasound.config import ScenarioConfig, init_weights
from lorasound.edge import EdgeModelConfig
from lorasound.lora import CapacitorSpec, LinkConfig
from lorasound.scheduler import EnergyConstants, ResolutionOption
from lorasound.tensor import Tensor
from lorasound.weights import WeightStore

# Table-2 style constants; e_sleep is a scenario value
TABLE_CONSTANTS = EnergyConstants(e_pre=0.0282, e_sleep=0.010,
                                  e_rx=0.0765, e_inf=0.142)


def default_scenario(**overrides) -> ScenarioConfig:
    """Scenario 1 style configuration with the stock model sizes."""
    kwargs = dict(
        capacitor=CapacitorSpec(0.1, 4.0, 1.5165750888103102),  # 685 mJ
        link=LinkConfig(),
        constants=TABLE_CONSTANTS,
        options=(ResolutionOption(0, 0.62), ResolutionOption(8, 0.70),
                 ResolutionOption(16, 0.74), ResolutionOption(32, 0.78),
                 ResolutionOption(64, 0.81)),
        edge=EdgeModelConfig(),
        vit=VitConfig(),
        seed=7,
    )
    kwargs.update(overrides)
    return ScenarioConfig(**kwargs)


def tiny_scenario(**overrides) -> ScenarioConfig:
    """Small model sizes so per-event tests stay fast."""
    kwargs = dict(
        capacitor=CapacitorSpec(0.1, 4.0, 1.5165750888103102),
        link=LinkConfig(),
        constants=TABLE_CONSTANTS,
        options=(ResolutionOption(0, 0.60), ResolutionOption(8, 0.70)),
        edge=EdgeModelConfig(r_l=4, r_h=8, t_l=4, t_h=4, p=2, k=1,
                             class_count=2, enc_channels=(1, 1),
                             cls_channels=(1, 1)),
        vit=VitConfig(p=2, e=8, blocks=2, heads=2),
        seed=11,
    )
    kwargs.update(overrides)
    return ScenarioConfig(**kwargs)


def short_clip(seed: int = 1):
    return synthesize_clip(seed, duration_s=0.25)


def zero_store(shapes: dict[str, tuple[int, ...]],
               overrides: dict[str, np.ndarray] | None = None) -> WeightStore:
    """All-zero weights for the given shapes, some optionally replaced."""
    overrides = overrides or {}
    store = WeightStore()
    for name, dims in shapes.items():
        if name in overrides:
            store.add(name, Tensor(np.asarray(overrides[name], dtype=np.float32)))
        else:
            store.add(name, Tensor(np.zeros(dims, dtype=np.float32)))
    return store


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def scenario():
    return default_scenario()


@pytest.fixture
def scenario_weights(scenario):
    return init_weights(scenario, scenario.seed)
