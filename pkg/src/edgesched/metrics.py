"""Edge-ratio and migration metrics reconstructed from a simulation trace."""

from __future__ import annotations

import csv
import io
import statistics
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Optional, Sequence

from .simulator import SimulationTrace

CSV_COLUMNS = ("scenario", "scheduler", "service", "edge_ratio", "mean_edge_ratio", "stddev",
               "migrations_intra", "migrations_e2c", "migrations_c2e")

MIGRATION_KINDS = {("edge", "edge"): "intra", ("edge", "cloud"): "e2c", ("cloud", "edge"): "c2e"}


@dataclass(frozen=True)
class MetricsReport:
    per_deployment_edge_ratio: dict[str, float]
    mean_edge_ratio: float
    edge_ratio_stddev: float
    per_kind_migrations: dict[str, int] = field(default_factory=dict)
    scenario: str = ""
    scheduler: str = ""
    seed: int = 0

    @property
    def total_migrations(self) -> int:
        return sum(self.per_kind_migrations.values())

    def rows(self) -> list[dict]:
        mig = self.per_kind_migrations
        return [{"scenario": self.scenario, "scheduler": self.scheduler, "service": s,
                 "edge_ratio": r, "mean_edge_ratio": self.mean_edge_ratio,
                 "stddev": self.edge_ratio_stddev, "migrations_intra": mig.get("intra", 0),
                 "migrations_e2c": mig.get("e2c", 0), "migrations_c2e": mig.get("c2e", 0)}
                for s, r in sorted(self.per_deployment_edge_ratio.items())]


def compute_metrics(trace: SimulationTrace) -> MetricsReport:
    """Time-weighted share of each service's running pods that sit on the edge.

    Intervals where a service has no running pod do not count towards its
    average.  A service that never runs a pod gets ratio 0.
    """
    records = trace.records
    if not records:
        raise ValueError("empty trace")
    init = records[0]
    if init["event"] != "init":
        raise ValueError("trace does not start with an init record")
    kinds = init["extra"]["nodes"]
    services = init["extra"]["services"]

    # pod -> (service, on_edge) for running pods
    running = {p: (s, kinds[n] == "edge") for p, (s, n) in init["extra"]["pods"].items()}
    weighted = dict.fromkeys(services, 0.0)
    covered = dict.fromkeys(services, 0.0)
    migrations = dict.fromkeys(MIGRATION_KINDS.values(), 0)
    last_t = 0.0

    def accumulate(until: float) -> None:
        dt = until - last_t
        if dt <= 0:
            return
        edge = dict.fromkeys(services, 0)
        tot = dict.fromkeys(services, 0)
        for s, on_edge in running.values():
            tot[s] += 1
            edge[s] += on_edge
        for s in services:
            if tot[s]:
                weighted[s] += dt * edge[s] / tot[s]
                covered[s] += dt

    for r in records[1:]:
        ev = r["event"]
        if ev not in ("PodChanged", "PodDeleted", "Migration", "end"):
            continue
        accumulate(r["t"])
        last_t = max(last_t, r["t"])
        if ev == "PodChanged":
            phase = r["extra"].get("phase")
            if phase == "running":
                running[r["pod"]] = (r["service"], kinds[r["node"]] == "edge")
            elif phase == "terminating":
                running.pop(r["pod"], None)
        elif ev == "PodDeleted":
            running.pop(r["pod"], None)
        elif ev == "Migration":
            key = MIGRATION_KINDS.get((r["extra"]["src_kind"], r["extra"]["dst_kind"]))
            if key:
                migrations[key] += 1
        elif ev == "end":
            break

    ratios = {s: (100.0 * weighted[s] / covered[s] if covered[s] else 0.0) for s in services}
    values = list(ratios.values())
    return MetricsReport(ratios, statistics.fmean(values), statistics.pstdev(values), migrations,
                         init["extra"].get("scenario", ""), init["extra"].get("scheduler", ""),
                         init["extra"].get("seed", 0))


def metrics_csv(reports: Iterable[MetricsReport], extras: Optional[Sequence[Mapping[str, Any]]] = None) -> str:
    """Render reports as CSV, one row per service.

    ``extras`` holds one mapping per report whose keys become additional
    columns right after ``scheduler``.
    """
    reports = list(reports)
    extras = list(extras) if extras is not None else [{} for _ in reports]
    if len(extras) != len(reports):
        raise ValueError("need one extras mapping per report")
    extra_cols = tuple(extras[0]) if extras else ()
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS[:2] + extra_cols + CSV_COLUMNS[2:],
                            lineterminator="\n")
    writer.writeheader()
    for rep, extra in zip(reports, extras):
        for row in rep.rows():
            row.update(extra)
            writer.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()
