"""Fragmentation-minimising placement of a pod batch onto edge nodes.

Pods of one service are interchangeable, so the dynamic programme runs over
per-service count vectors instead of labelled pod subsets::

    dp[i][v] = min over w <= v that fit node i of
               dp[i-1][v - w] + frag(node_i + w) - frag(node_i)

with ``dp[0][0] = frag(state)``.  The answer is the vector with the most
pods placed, then the least fragmentation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

from .model import ClusterState
from .objective import fragmentation

# (cap_cpu, cap_mem, used_cpu, used_mem)
NodeLoad = tuple[int, int, int, int]


@dataclass(frozen=True)
class Matching:
    targets: dict[str, str] = field(default_factory=dict)
    achieved_fragmentation: float = 0.0
    cloud_id: str = ""

    @property
    def placed(self) -> dict[str, str]:
        return {p: n for p, n in self.targets.items() if n != self.cloud_id}

    @property
    def unplaced(self) -> list[str]:
        return sorted(p for p, n in self.targets.items() if n == self.cloud_id)


def _frag(cap_cpu: int, cap_mem: int, cpu: int, mem: int) -> float:
    return 1.0 - (cpu / cap_cpu) * (mem / cap_mem)


def _fitting_vectors(node: NodeLoad, res: Sequence[tuple[int, int]],
                     counts: Sequence[int]) -> list[tuple[tuple[int, ...], float]]:
    """All count vectors w <= counts that fit the node's free room, with their frag change."""
    cap_cpu, cap_mem, used_cpu, used_mem = node
    free_cpu, free_mem = cap_cpu - used_cpu, cap_mem - used_mem
    base = _frag(cap_cpu, cap_mem, used_cpu, used_mem)
    out: list[tuple[tuple[int, ...], float]] = []
    k = len(counts)
    w = [0] * k

    def rec(s: int, cpu: int, mem: int) -> None:
        if s == k:
            out.append((tuple(w), _frag(cap_cpu, cap_mem, used_cpu + cpu, used_mem + mem) - base))
            return
        rc, rm = res[s]
        n = 0
        while n <= counts[s] and cpu + n * rc <= free_cpu and mem + n * rm <= free_mem:
            w[s] = n
            rec(s + 1, cpu + n * rc, mem + n * rm)
            n += 1
        w[s] = 0

    rec(0, 0, 0)
    return out


@lru_cache(maxsize=262_144)
def match_counts(nodes: tuple[NodeLoad, ...], res: tuple[tuple[int, int], ...],
                 counts: tuple[int, ...]) -> tuple[tuple[int, ...], ...]:
    """Per-node allocation count vectors for the optimal matching.

    Pure function of its (hashable) arguments, hence memoised.
    """
    k = len(counts)
    zero = (0,) * k
    dp: dict[tuple[int, ...], float] = {zero: 0.0}
    parents: list[dict[tuple[int, ...], tuple[int, ...]]] = []
    for node in nodes:
        fitting = _fitting_vectors(node, res, counts)
        ndp: dict[tuple[int, ...], float] = {}
        par: dict[tuple[int, ...], tuple[int, ...]] = {}
        for v, d in dp.items():
            room = [c - x for c, x in zip(counts, v)]
            for w, df in fitting:
                ok = True
                for j in range(k):
                    if w[j] > room[j]:
                        ok = False
                        break
                if not ok:
                    continue
                nv = tuple(a + b for a, b in zip(v, w))
                val = d + df
                if val < ndp.get(nv, float("inf")):
                    ndp[nv] = val
                    par[nv] = w
        dp = ndp
        parents.append(par)

    best = min(dp, key=lambda v: (-sum(v), dp[v], v))
    alloc: list[tuple[int, ...]] = []
    v = best
    for par in reversed(parents):
        w = par[v]
        alloc.append(w)
        v = tuple(a - b for a, b in zip(v, w))
    alloc.reverse()
    return tuple(alloc)


def node_loads(state: ClusterState, exclude: Iterable[str] = ()) -> tuple[NodeLoad, ...]:
    excl = set(exclude)
    used: dict[str, list[int]] = {n.node_id: [0, 0] for n in state.edge_nodes}
    for p in state.pods.values():
        if p.node_id in used and p.pod_id not in excl:
            r = state.services[p.service_id].pod_resources
            u = used[p.node_id]
            u[0] += r.cpu
            u[1] += r.mem
    return tuple((n.capacity.cpu, n.capacity.mem, used[n.node_id][0], used[n.node_id][1])
                 for n in state.edge_nodes)


def match(state: ClusterState, new_pods: Iterable[str]) -> Matching:
    """Seat as many of ``new_pods`` as possible on edge nodes, least fragmentation first.

    The pods' current locations are ignored (they are treated as pending).
    Pods left over map to the cloud node.  Concrete pod ids are handed out
    to slots in sorted id order, nodes in cluster order.
    """
    pods = sorted(set(new_pods))
    cloud = state.cloud_id
    removed = state.with_locations({p: None for p in pods})
    if not pods:
        return Matching({}, fragmentation(removed), cloud)
    services = sorted({state.pods[p].service_id for p in pods})
    by_service = {s: [p for p in pods if state.pods[p].service_id == s] for s in services}
    res = tuple(tuple(state.services[s].pod_resources) for s in services)
    counts = tuple(len(by_service[s]) for s in services)
    edges = state.edge_nodes
    alloc = match_counts(node_loads(removed), res, counts)

    targets: dict[str, str] = {}
    cursor = {s: 0 for s in services}
    for node, w in zip(edges, alloc):
        for s, n in zip(services, w):
            for p in by_service[s][cursor[s]:cursor[s] + n]:
                targets[p] = node.node_id
            cursor[s] += n
    for s in services:
        for p in by_service[s][cursor[s]:]:
            targets[p] = cloud
    final = removed.with_locations({p: n for p, n in targets.items()})
    return Matching(targets, fragmentation(final), cloud)
