"""Run configuration: QoS constants, scheduler knobs and simulator timing.

A run-config file is YAML, every key optional::

    qos: {alpha: 100, beta: 1, gamma: 10000}
    scheduler: {kind: kubedsm, m_c2e: 5, m_er: 3, suggest_period_sec: 15}
    simulator: {pod_start_sec: 2.0, pod_delete_sec: 1.0, bind_ack_sec: 0.2,
                hpa_period_sec: 15, plan_timeout_sec: 30}

The path may also come from the ``EDGESCHED_CONFIG`` environment variable.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping, Optional

import yaml

from .objective import QosConstants
from .scheduler import SchedulerConfig
from .simulator import SCHEDULER_KINDS, LifecycleLatencies

ENV_VAR = "EDGESCHED_CONFIG"


@dataclass(frozen=True)
class SimulatorSettings:
    latencies: LifecycleLatencies = LifecycleLatencies()
    hpa_period_sec: float = 15.0
    plan_timeout_sec: float = 30.0
    # migration replicas keep the original's creation time for scale-down ordering
    replica_inherits_age: bool = False

    def sim_kwargs(self) -> dict[str, Any]:
        return {"latencies": self.latencies, "hpa_period_sec": self.hpa_period_sec,
                "plan_timeout_sec": self.plan_timeout_sec, "inherit_age": self.replica_inherits_age}


@dataclass(frozen=True)
class RunConfig:
    qos: QosConstants = QosConstants()
    scheduler_kind: str = "kubedsm"
    scheduler: SchedulerConfig = SchedulerConfig()
    simulator: SimulatorSettings = field(default_factory=SimulatorSettings)

    def to_dict(self) -> dict[str, Any]:
        sim = {**asdict(self.simulator.latencies),
               **{k: v for k, v in asdict(self.simulator).items() if k != "latencies"}}
        return {"qos": asdict(self.qos),
                "scheduler": {"kind": self.scheduler_kind, **asdict(self.scheduler)},
                "simulator": sim}


def _pick(cls, data: Mapping[str, Any], section: str) -> dict[str, Any]:
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ValueError(f"unknown {section} keys: {', '.join(sorted(unknown))}")
    return dict(data)


def run_config_from_dict(data: Optional[Mapping[str, Any]]) -> RunConfig:
    data = dict(data or {})
    unknown = set(data) - {"qos", "scheduler", "simulator"}
    if unknown:
        raise ValueError(f"unknown run-config sections: {', '.join(sorted(unknown))}")
    qos = QosConstants(**_pick(QosConstants, data.get("qos") or {}, "qos"))
    sched = dict(data.get("scheduler") or {})
    kind = str(sched.pop("kind", "kubedsm")).lower()
    if kind not in SCHEDULER_KINDS:
        raise ValueError(f"unknown scheduler kind {kind!r}")
    sched_cfg = SchedulerConfig(**_pick(SchedulerConfig, sched, "scheduler"))
    sim = dict(data.get("simulator") or {})
    lat_keys = {f.name for f in fields(LifecycleLatencies)}
    lat = LifecycleLatencies(**{k: sim.pop(k) for k in list(sim) if k in lat_keys})
    settings = SimulatorSettings(lat, **_pick(SimulatorSettings, sim, "simulator"))
    return RunConfig(qos, kind, sched_cfg, settings)


def load_run_config(path: Optional[str | Path] = None) -> RunConfig:
    """Load ``path``, else the file named by ``EDGESCHED_CONFIG``, else defaults."""
    path = path or os.environ.get(ENV_VAR)
    if not path:
        return RunConfig()
    with open(path) as fh:
        return run_config_from_dict(yaml.safe_load(fh))
