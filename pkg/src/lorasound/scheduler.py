"""Resource-aware adaptive-resolution scheduler.

Chooses the assistance resolution (or local bypass, R_a = 0) that maximizes
pre-estimated accuracy while the whole round fits the per-power-cycle energy
budget. The option set is tiny, so the search is an exhaustive scan.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .errors import BudgetError, InfeasiblePayloadError
from .lora import LinkConfig, LoRaParams, rx_energy, time_on_air, tx_energy

__all__ = [
    "EnergyConstants",
    "ResolutionOption",
    "ScheduleProblem",
    "ScheduleDecision",
    "round_energy",
    "choose_resolution",
]


@dataclass(frozen=True)
class EnergyConstants:
    """Fixed per-phase energy terms, in joules."""

    e_pre: float
    e_sleep: float
    e_rx: float
    e_inf: float

    def __post_init__(self):
        for name in ("e_pre", "e_sleep", "e_rx", "e_inf"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @classmethod
    def from_link(cls, e_pre: float, e_sleep: float, e_inf: float,
                  link: LinkConfig) -> "EnergyConstants":
        return cls(e_pre=e_pre, e_sleep=e_sleep, e_rx=rx_energy(link), e_inf=e_inf)


@dataclass(frozen=True)
class ResolutionOption:
    """Candidate assistance resolution; R_a = 0 means local bypass."""

    r_a: int
    est_accuracy: float

    def __post_init__(self):
        if self.r_a < 0 or (self.r_a > 0 and self.r_a & (self.r_a - 1)):
            raise ValueError(f"R_a must be 0 or a power of two, got {self.r_a}")
        if not 0.0 <= self.est_accuracy <= 1.0:
            raise ValueError(f"accuracy {self.est_accuracy} outside [0, 1]")

    @property
    def payload_bytes(self) -> int:
        return self.r_a * self.r_a


@dataclass(frozen=True)
class ScheduleProblem:
    options: tuple[ResolutionOption, ...]
    params: LoRaParams
    link: LinkConfig
    constants: EnergyConstants
    budget_j: float

    def __post_init__(self):
        options = tuple(self.options)
        object.__setattr__(self, "options", options)
        if not any(o.r_a == 0 for o in options):
            raise ValueError("option set must include the R_a=0 bypass")
        if len({o.r_a for o in options}) != len(options):
            raise ValueError("duplicate R_a options")
        if self.budget_j <= 0:
            raise ValueError("budget must be positive")
        by_r = sorted(options, key=lambda o: o.r_a)
        accs = [o.est_accuracy for o in by_r]
        if any(a > b for a, b in zip(accs, accs[1:])):
            warnings.warn("estimated accuracy is not nondecreasing in R_a",
                          stacklevel=2)


@dataclass(frozen=True)
class ScheduleDecision:
    chosen_r_a: int
    est_accuracy: float
    round_energy_j: float
    feasible: tuple[bool, ...]  # aligned with the problem's option order


def round_energy(option: ResolutionOption, params: LoRaParams,
                 link: LinkConfig, constants: EnergyConstants) -> float:
    """Energy of one full round for the option, or inf when infeasible.

    Bypass rounds skip the Tx, sleep, and Rx phases entirely.
    """
    if option.r_a == 0:
        return constants.e_pre + constants.e_inf
    try:
        toa = time_on_air(option.payload_bytes, params, link)
    except InfeasiblePayloadError:
        return math.inf
    return (constants.e_pre + tx_energy(params, toa, link)
            + constants.e_sleep + constants.e_rx + constants.e_inf)


def choose_resolution(problem: ScheduleProblem) -> ScheduleDecision:
    """Exhaustive scan: maximize accuracy among feasible options.

    Ties resolve to the smallest R_a. Bypass must fit the budget; a scenario
    where it does not is a configuration error.
    """
    energies = [round_energy(o, problem.params, problem.link, problem.constants)
                for o in problem.options]
    feasible = tuple(e <= problem.budget_j for e in energies)
    best = None
    for option, energy, ok in zip(problem.options, energies, feasible):
        if not ok:
            continue
        if (best is None
                or option.est_accuracy > best[0].est_accuracy
                or (option.est_accuracy == best[0].est_accuracy
                    and option.r_a < best[0].r_a)):
            best = (option, energy)
    if best is None or not any(
            o.r_a == 0 and ok for o, ok in zip(problem.options, feasible)):
        raise BudgetError(
            f"bypass round does not fit the {problem.budget_j:.6f} J budget")
    option, energy = best
    return ScheduleDecision(chosen_r_a=option.r_a,
                            est_accuracy=option.est_accuracy,
                            round_energy_j=energy,
                            feasible=feasible)
