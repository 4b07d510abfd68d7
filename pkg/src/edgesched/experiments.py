"""Batches of simulation runs, manifests and per-figure tables."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import statistics
import tempfile
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

from . import __version__
from .config import RunConfig, run_config_from_dict
from .fixtures import QOS_PRESETS, cluster_from_dict, with_qos_targets
from .metrics import MetricsReport, compute_metrics, metrics_csv
from .simulator import SchedulerChoice, SimulationTrace, Simulation
from .workload import MEAN_SWEEP, STD_SWEEP, Scenario, scenario_from_dict

BASELINES = ("kubedsm", "k8s", "bef", "sef", "cf")
MIGRATION_VARIANTS = ("kubedsm", "kubedsm-midmig", "kubedsm-nocloudoffload", "kubedsm-nomig", "k8s")
QOS_VARIANTS = ("AllEqual", "C>A", "RespectD")


def atomic_write(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sha256(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


@dataclass(frozen=True)
class RunSpec:
    scenario: Scenario
    scheduler: str = "kubedsm"
    qos_preset: str = "Default"

    @property
    def key(self) -> str:
        return f"{self.scenario.name}|{self.scheduler}|{self.qos_preset}|{self.scenario.seed}"


def make_choice(name: str, cfg: RunConfig) -> SchedulerChoice:
    base = cfg.scheduler
    extra = {"suggest_period_sec": base.suggest_period_sec, "reorder_strict": base.reorder_strict,
             "size_normalizer": base.size_normalizer, "hard_caps": base.hard_caps}
    if "-" in name:
        return SchedulerChoice.parse(name, cfg.qos, **extra)
    return SchedulerChoice.parse(name, cfg.qos, m_c2e=base.m_c2e, m_er=base.m_er, **extra)


def execute(cluster: dict, spec: RunSpec, cfg: RunConfig) -> tuple[SimulationTrace, MetricsReport]:
    state = cluster_from_dict(cluster)
    if spec.qos_preset != "Default":
        if spec.qos_preset not in QOS_PRESETS:
            raise ValueError(f"unknown QoS preset {spec.qos_preset!r}")
        state = with_qos_targets(state, QOS_PRESETS[spec.qos_preset])
    sim = Simulation(state, spec.scenario, make_choice(spec.scheduler, cfg), **cfg.simulator.sim_kwargs())
    trace = sim.run()
    return trace, compute_metrics(trace)


def manifest_for(cluster: dict, spec: RunSpec, cfg: RunConfig, outputs: dict[str, str]) -> dict[str, Any]:
    return {"tool": "edgesched", "version": __version__, "cluster": cluster,
            "scenario": spec.scenario.to_dict(), "scheduler": spec.scheduler,
            "qos_preset": spec.qos_preset, "seed": spec.scenario.seed, "run_config": cfg.to_dict(),
            "outputs": {name: sha256(text) for name, text in sorted(outputs.items())}}


def spec_from_manifest(manifest: dict) -> tuple[dict, RunSpec, RunConfig]:
    spec = RunSpec(scenario_from_dict(manifest["scenario"]), manifest["scheduler"],
                   manifest.get("qos_preset", "Default"))
    return manifest["cluster"], spec, run_config_from_dict(manifest["run_config"])


def run_outputs(cluster: dict, spec: RunSpec, cfg: RunConfig) -> dict[str, str]:
    trace, report = execute(cluster, spec, cfg)
    return {"trace.jsonl": trace.to_jsonl(), "metrics.csv": metrics_csv([report])}


def write_run(out_dir: str | Path, cluster: dict, spec: RunSpec, cfg: RunConfig) -> dict[str, Any]:
    outputs = run_outputs(cluster, spec, cfg)
    manifest = manifest_for(cluster, spec, cfg, outputs)
    for name, text in outputs.items():
        atomic_write(Path(out_dir) / name, text)
    atomic_write(Path(out_dir) / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


# ---------------------------------------------------------------------------
# comparisons


@dataclass
class RunResult:
    spec: RunSpec
    report: Optional[MetricsReport] = None
    error: Optional[str] = None


def _one(args) -> RunResult:
    cluster, spec, cfg = args
    try:
        return RunResult(spec, execute(cluster, spec, cfg)[1])
    except Exception as exc:  # recorded and excluded, see compare()
        return RunResult(spec, error=f"{type(exc).__name__}: {exc}")


def build_specs(scenarios: Sequence[str | Scenario], schedulers: Sequence[str], seeds: Iterable[int],
                qos_presets: Sequence[str] = ("Default",)) -> list[RunSpec]:
    seeds = list(seeds)
    out = []
    for sc in scenarios:
        base = sc if isinstance(sc, Scenario) else Scenario.from_name(sc)
        for preset in qos_presets:
            for seed in seeds:
                # every scheduler sees the same cycle targets for a given seed
                scen = base.with_seed(seed)
                out.extend(RunSpec(scen, name, preset) for name in schedulers)
    return out


def run_specs(cluster: dict, specs: Sequence[RunSpec], cfg: RunConfig, jobs: int = 1) -> list[RunResult]:
    work = [(cluster, s, cfg) for s in specs]
    if jobs <= 1:
        return [_one(w) for w in work]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_one, work, chunksize=4))


def long_table(results: Sequence[RunResult]) -> str:
    ok = [r for r in results if r.report is not None]
    return metrics_csv([r.report for r in ok],
                       [{"seed": r.spec.scenario.seed, "qos_preset": r.spec.qos_preset} for r in ok])


# ---------------------------------------------------------------------------
# per-figure tables


def read_long(text: str) -> list[dict[str, Any]]:
    rows = list(csv.DictReader(io.StringIO(text)))
    for r in rows:
        for k in ("edge_ratio", "mean_edge_ratio", "stddev"):
            r[k] = float(r[k])
        for k in ("migrations_intra", "migrations_e2c", "migrations_c2e", "seed"):
            r[k] = int(r[k])
    return rows


def _runs(rows: list[dict]) -> list[dict]:
    """Collapse per-service rows back to one row per run."""
    seen = {}
    for r in rows:
        seen.setdefault((r["scenario"], r["scheduler"], r["qos_preset"], r["seed"]), r)
    return list(seen.values())


def _table(header: Sequence[str], body: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in body:
        w.writerow([f"{v:.6f}" if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _mean_by(rows: list[dict], keys: Sequence[str], value: str) -> list[tuple]:
    groups: dict[tuple, list[float]] = defaultdict(list)
    for r in rows:
        groups[tuple(r[k] for k in keys)].append(r[value])
    return [(*k, statistics.fmean(v), len(v)) for k, v in sorted(groups.items())]


def figure_tables(long_csv: str) -> dict[str, str]:
    """Pre-grouped tables, one per figure family; families without data are omitted."""
    rows = read_long(long_csv)
    default = [r for r in rows if r["qos_preset"] == "Default"]
    runs = _runs(default)
    out = {}

    mean_runs = [r for r in runs if r["scenario"] in MEAN_SWEEP]
    if mean_runs:
        out["mean_sweep.csv"] = _table(("scenario", "scheduler", "mean_edge_ratio", "runs"),
                                       _mean_by(mean_runs, ("scenario", "scheduler"), "mean_edge_ratio"))
    std_runs = [r for r in runs if r["scenario"] in STD_SWEEP]
    if std_runs:
        out["std_sweep.csv"] = _table(("scenario", "scheduler", "mean_edge_ratio", "runs"),
                                      _mean_by(std_runs, ("scenario", "scheduler"), "mean_edge_ratio"))
    if default:
        out["per_deployment.csv"] = _table(("scheduler", "service", "edge_ratio", "runs"),
                                           _mean_by(default, ("scheduler", "service"), "edge_ratio"))
        out["stddev.csv"] = _table(("scheduler", "stddev", "runs"), _mean_by(runs, ("scheduler",), "stddev"))
    variant_runs = [r for r in runs if r["scheduler"] in MIGRATION_VARIANTS]
    if any(r["scheduler"].startswith("kubedsm-") for r in variant_runs):
        body = []
        for sched, ratio, n in _mean_by(variant_runs, ("scheduler",), "mean_edge_ratio"):
            mig = [r for r in variant_runs if r["scheduler"] == sched]
            body.append((sched, ratio,
                         statistics.fmean(r["migrations_intra"] for r in mig),
                         statistics.fmean(r["migrations_e2c"] for r in mig),
                         statistics.fmean(r["migrations_c2e"] for r in mig), n))
        out["migration_variants.csv"] = _table(
            ("scheduler", "mean_edge_ratio", "migrations_intra", "migrations_e2c", "migrations_c2e", "runs"), body)
    qos_rows = [r for r in rows if r["qos_preset"] in QOS_VARIANTS]
    if qos_rows:
        out["qos_variants.csv"] = _table(("qos_preset", "scheduler", "service", "edge_ratio", "runs"),
                                         _mean_by(qos_rows, ("qos_preset", "scheduler", "service"), "edge_ratio"))
    return out


def compare_manifest(cluster: dict, specs: Sequence[RunSpec], cfg: RunConfig,
                     outputs: dict[str, str], failures: Sequence[RunResult]) -> dict[str, Any]:
    return {"tool": "edgesched", "version": __version__, "cluster": cluster, "run_config": cfg.to_dict(),
            "runs": [{"scenario": s.scenario.to_dict(), "scheduler": s.scheduler, "qos_preset": s.qos_preset}
                     for s in specs],
            "failures": [{"run": f.spec.key, "error": f.error} for f in failures],
            "outputs": {name: sha256(text) for name, text in sorted(outputs.items())}}


def specs_from_compare_manifest(manifest: dict) -> tuple[dict, list[RunSpec], RunConfig]:
    specs = [RunSpec(scenario_from_dict(r["scenario"]), r["scheduler"], r["qos_preset"])
             for r in manifest["runs"]]
    return manifest["cluster"], specs, run_config_from_dict(manifest["run_config"])

