"""Randomised comparisons of the heuristics against the exhaustive oracle."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .matching import match
from .model import ClusterState, NodeKind, NodeSpec, PodRecord, ResourceVector, ServiceSpec
from .objective import DEFAULT_QOS, QosConstants, qos_total
from .oracle import brute_force_match, exact_allocate
from .scheduler import immediate_schedule


def random_instance(rng: np.random.Generator, max_edges: int = 3, max_new: int = 6,
                    max_existing: int = 4) -> tuple[ClusterState, list[str]]:
    """A small cluster with some pods already on the edge and a pending batch."""
    n_edges = int(rng.integers(1, max_edges + 1))
    nodes = [NodeSpec(f"E{i}", NodeKind.EDGE,
                      ResourceVector(int(rng.integers(2, 8)) * 1000, int(rng.integers(2, 6)) * 1024))
             for i in range(n_edges)]
    nodes.append(NodeSpec("CLOUD", NodeKind.CLOUD, None))
    services = {}
    for sid in "ABCD"[:int(rng.integers(1, 5))]:
        cpu = int(rng.choice([500, 1000, 1500, 2000]))
        mem = int(rng.choice([475, 950, 1425, 1900]))
        services[sid] = ServiceSpec(sid, ResourceVector(cpu, mem), float(rng.choice([0.1, 0.5, 1.0])))
    state = ClusterState(tuple(nodes), services, {})
    sids = sorted(services)
    pods = {}
    used = {n.node_id: ResourceVector(0, 0) for n in nodes[:-1]}
    for i in range(int(rng.integers(0, max_existing + 1))):
        sid = sids[int(rng.integers(len(sids)))]
        node = nodes[int(rng.integers(n_edges))]
        r = services[sid].pod_resources
        where = node.node_id if (used[node.node_id] + r).fits_in(node.capacity) else "CLOUD"
        if where != "CLOUD":
            used[where] = used[where] + r
        pods[f"old-{i}"] = PodRecord(f"old-{i}", sid, where)
    new = [f"new-{i}" for i in range(int(rng.integers(0, max_new + 1)))]
    for p in new:
        pods[p] = PodRecord(p, sids[int(rng.integers(len(sids)))], None)
    return ClusterState(tuple(nodes), services, pods), new


@dataclass
class CheckReport:
    instances: int = 0
    count_mismatches: int = 0
    frag_mismatches: int = 0
    max_frag_error: float = 0.0
    alloc_instances: int = 0
    gap_violations: int = 0
    gaps: list[float] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def ok(self) -> bool:
        return self.count_mismatches == 0 and self.frag_mismatches == 0 and self.gap_violations == 0


def run_checks(n: int = 1000, seed: int = 0, alloc_every: int = 10, tol: float = 1e-9,
               c: QosConstants = DEFAULT_QOS) -> CheckReport:
    """match vs brute force on ``n`` instances; every ``alloc_every``-th also gets the QoS gap check."""
    rng = np.random.default_rng(seed)
    rep = CheckReport()
    start = time.perf_counter()
    for i in range(n):
        state, new = random_instance(rng)
        fast = match(state, new)
        slow = brute_force_match(state, new)
        rep.instances += 1
        if len(fast.placed) != len(slow.placed):
            rep.count_mismatches += 1
        err = abs(fast.achieved_fragmentation - slow.achieved_fragmentation)
        rep.max_frag_error = max(rep.max_frag_error, err)
        if err > tol:
            rep.frag_mismatches += 1
        if alloc_every and i % alloc_every == 0 and len(state.pods) <= 8:
            _, best, _ = exact_allocate(state, new, c)
            d = immediate_schedule(state, new, c=c)
            # score what the decision realises once match seats its edge pods
            seats = match(state, d.to_edge).placed
            realised = state.with_locations({p: seats.get(p, state.cloud_id) for p in new})
            gap = best - qos_total(realised, c)
            rep.alloc_instances += 1
            rep.gaps.append(gap)
            if gap < -1e-6 * max(1.0, abs(best)):
                rep.gap_violations += 1
    rep.seconds = time.perf_counter() - start
    return rep
