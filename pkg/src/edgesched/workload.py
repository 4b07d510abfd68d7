"""Scenario definitions and per-cycle replica targets.

Each cycle draws an edge utilisation fraction from a normal distribution,
turns it into a resource budget over the whole edge, splits the budget
evenly between services and converts each share into a replica count.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

from .model import ClusterState, edge_capacity_totals


@dataclass(frozen=True)
class Scenario:
    name: str
    mean_utilization: float
    std_utilization: float
    cycles: int = 12
    cycle_sec: float = 90.0
    seed: int = 0
    min_frac: float = 0.1
    max_frac: float = 2.0

    def __post_init__(self):
        if self.mean_utilization <= 0:
            raise ValueError("mean_utilization must be positive")
        if self.std_utilization < 0:
            raise ValueError("std_utilization must be non-negative")
        if self.cycles < 0:
            raise ValueError("cycles must be non-negative")
        if self.cycle_sec <= 0:
            raise ValueError("cycle_sec must be positive")
        if not 0 <= self.min_frac <= self.max_frac:
            raise ValueError("need 0 <= min_frac <= max_frac")

    @classmethod
    def from_name(cls, name: str, **kw) -> "Scenario":
        """Parse the ``"<mean>_<std>"`` naming convention, e.g. ``"1.5_0.4"``."""
        try:
            mean, std = (float(x) for x in name.split("_"))
        except ValueError:
            raise ValueError(f"scenario name {name!r} is not of the form <mean>_<std>") from None
        return cls(name, mean, std, **kw)

    def with_seed(self, seed: int) -> "Scenario":
        return Scenario(**{**asdict(self), "seed": seed})

    @property
    def horizon(self) -> float:
        return self.cycles * self.cycle_sec

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def scenario_from_dict(data: Mapping[str, Any]) -> Scenario:
    data = dict(data)
    if "mean_utilization" not in data:
        return Scenario.from_name(str(data.pop("name")), **data)
    data.setdefault("name", f"{data['mean_utilization']}_{data.get('std_utilization', 0.0)}")
    return Scenario(**data)


def load_scenario(path: str | Path) -> Scenario:
    with open(path) as fh:
        return scenario_from_dict(yaml.safe_load(fh))


def sample_fractions(scenario: Scenario) -> list[float]:
    rng = np.random.default_rng(scenario.seed)
    draws = rng.normal(scenario.mean_utilization, scenario.std_utilization, size=scenario.cycles)
    # clamp rather than resample so every variant sees the same stream
    return [float(x) for x in np.clip(draws, scenario.min_frac, scenario.max_frac)]


def replicas_for_fraction(frac: float, cluster: ClusterState) -> dict[str, int]:
    if not cluster.services:
        raise ValueError("cluster has no services")
    cap = edge_capacity_totals(cluster)
    n = len(cluster.services)
    cpu_share = frac * cap.cpu / n
    mem_share = frac * cap.mem / n
    out = {}
    for sid in sorted(cluster.services):
        r = cluster.services[sid].pod_resources
        out[sid] = max(1, min(math.floor(cpu_share / r.cpu), math.floor(mem_share / r.mem)))
    return out


def generate_cycles(scenario: Scenario, cluster: ClusterState) -> list[tuple[int, dict[str, int]]]:
    return [(i, replicas_for_fraction(f, cluster)) for i, f in enumerate(sample_fractions(scenario))]


MEAN_SWEEP = tuple(f"{m / 10:.1f}_0.4" for m in range(11, 17))
STD_SWEEP = tuple(f"1.5_{s / 10:.1f}" for s in range(1, 6))
