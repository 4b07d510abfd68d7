"""Batch scheduling and migration suggestion.

Two entry points:

* :func:`immediate_schedule` places a batch of freshly created pods without
  touching running ones.
* :func:`suggest` periodically pulls up to ``m_c2e`` cloud pods back to the
  edge and reorders up to ``m_er`` edge pods to cut fragmentation.

Both go through :func:`make_decision`, which enumerates how many pods of
each service to send edge-ward and keeps the best-QoS split.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, NamedTuple, Optional, Sequence

from .matching import match_counts
from .model import ClusterState, ResourceVector, ZERO, edge_capacity_totals, edge_view, total
from .objective import (DEFAULT_QOS, QosConstants, move_gain, pod_size, qos_close,
                        qos_from_counts)

FRAG_EPS = 1e-9

# (m_c2e, m_er)
VARIANTS: dict[str, tuple[int, int]] = {
    "Original": (5, 3),
    "MidMig": (2, 1),
    "NoCloudOffload": (0, 3),
    "NoMig": (5, 0),
}


@dataclass(frozen=True)
class SchedulerConfig:
    m_c2e: int = 5
    m_er: int = 3
    suggest_period_sec: float = 15.0
    # reorder subsets strictly smaller than m_er instead of up to m_er
    reorder_strict: bool = False
    size_normalizer: str = "total"
    hard_caps: bool = False

    def __post_init__(self):
        if self.m_c2e < 0 or self.m_er < 0:
            raise ValueError("m_c2e and m_er must be non-negative")
        if self.suggest_period_sec <= 0:
            raise ValueError("suggest_period_sec must be positive")
        if self.size_normalizer not in ("total", "largest"):
            raise ValueError(f"unknown size normalizer {self.size_normalizer!r}")
        for name, value, cap in (("m_c2e", self.m_c2e, 10), ("m_er", self.m_er, 3)):
            if value > cap:
                msg = f"{name}={value} exceeds the practical limit of {cap}"
                if self.hard_caps:
                    raise ValueError(msg)
                warnings.warn(msg, stacklevel=3)

    @classmethod
    def variant(cls, name: str, **kw) -> "SchedulerConfig":
        m_c2e, m_er = VARIANTS[name]
        return cls(m_c2e=m_c2e, m_er=m_er, **kw)


class Migration(NamedTuple):
    pod_id: str
    source: Optional[str]
    dest: str


@dataclass(frozen=True)
class Decision:
    to_edge: tuple[str, ...] = ()
    to_cloud: tuple[str, ...] = ()
    migrations: tuple[Migration, ...] = ()
    # explicit edge node per to_edge pod; empty means "let match decide"
    targets: dict[str, str] = field(default_factory=dict)
    qos: float = float("nan")


# ---------------------------------------------------------------------------
# reordering


@lru_cache(maxsize=65_536)
def _reorder_core(caps: tuple[tuple[int, int], ...], counts: tuple[tuple[int, ...], ...],
                  res: tuple[tuple[int, int], ...], max_k: int) -> tuple[tuple[int, int, int], ...]:
    """Best relocation of at most ``max_k`` edge pods as ``(service, src, dst)`` index triples."""
    n_nodes, n_svc = len(caps), len(res)
    used = []
    for i in range(n_nodes):
        cpu = sum(counts[i][s] * res[s][0] for s in range(n_svc))
        mem = sum(counts[i][s] * res[s][1] for s in range(n_svc))
        used.append((cpu, mem))

    def frag(u):
        return sum(1.0 - (u[i][0] / caps[i][0]) * (u[i][1] / caps[i][1]) for i in range(n_nodes))

    least = frag(used)
    best: Optional[tuple[tuple[int, ...], tuple[tuple[int, ...], ...]]] = None
    groups = [(i, s) for i in range(n_nodes) for s in range(n_svc) if counts[i][s] > 0]
    for size in range(1, max_k + 1):
        for combo in itertools.combinations_with_replacement(range(len(groups)), size):
            take = [0] * len(groups)
            for g in combo:
                take[g] += 1
            if any(take[g] > counts[groups[g][0]][groups[g][1]] for g in range(len(groups))):
                continue
            rem = [list(u) for u in used]
            moved = [0] * n_svc
            for g, k in enumerate(take):
                if k:
                    i, s = groups[g]
                    rem[i][0] -= k * res[s][0]
                    rem[i][1] -= k * res[s][1]
                    moved[s] += k
            loads = tuple((caps[i][0], caps[i][1], rem[i][0], rem[i][1]) for i in range(n_nodes))
            alloc = match_counts(loads, res, tuple(moved))
            if sum(map(sum, alloc)) < size:
                continue
            after = [(rem[i][0] + sum(alloc[i][s] * res[s][0] for s in range(n_svc)),
                      rem[i][1] + sum(alloc[i][s] * res[s][1] for s in range(n_svc)))
                     for i in range(n_nodes)]
            f = frag(after)
            if f < least - FRAG_EPS:
                least = f
                best = (tuple(take), alloc)
    if best is None:
        return ()
    take, alloc = best
    moves = []
    for s in range(n_svc):
        sources = [0] * n_nodes
        for g, k in enumerate(take):
            if groups[g][1] == s:
                sources[groups[g][0]] += k
        dests = [alloc[i][s] for i in range(n_nodes)]
        # a pod put back on its own node is not a migration
        for i in range(n_nodes):
            stay = min(sources[i], dests[i])
            sources[i] -= stay
            dests[i] -= stay
        src_list = [i for i in range(n_nodes) for _ in range(sources[i])]
        dst_list = [i for i in range(n_nodes) for _ in range(dests[i])]
        moves.extend((s, a, b) for a, b in zip(src_list, dst_list))
    return tuple(moves)


def reorder_edge(state: ClusterState, cfg: SchedulerConfig = SchedulerConfig()) -> list[Migration]:
    """Relocate at most ``m_er`` edge pods among edge nodes if that strictly lowers fragmentation."""
    max_k = cfg.m_er - 1 if cfg.reorder_strict else cfg.m_er
    if max_k <= 0:
        return []
    edges = state.edge_nodes
    index = {n.node_id: i for i, n in enumerate(edges)}
    services = sorted(state.services)
    s_index = {s: j for j, s in enumerate(services)}
    counts = [[0] * len(services) for _ in edges]
    members: dict[tuple[int, int], list[str]] = {}
    for p in sorted(state.pods.values(), key=lambda p: p.pod_id):
        i = index.get(p.node_id)
        if i is None:
            continue
        j = s_index[p.service_id]
        counts[i][j] += 1
        members.setdefault((i, j), []).append(p.pod_id)
    moves = _reorder_core(tuple((n.capacity.cpu, n.capacity.mem) for n in edges),
                          tuple(map(tuple, counts)),
                          tuple(tuple(state.services[s].pod_resources) for s in services),
                          max_k)
    out = []
    for s, a, b in moves:
        pod = members[(a, s)].pop(0)
        out.append(Migration(pod, edges[a].node_id, edges[b].node_id))
    return out


# ---------------------------------------------------------------------------
# offloading


def free_edge_as_needed(state: ClusterState, need: ResourceVector, c: QosConstants = DEFAULT_QOS,
                        edge_totals: Optional[ResourceVector] = None) -> list[str]:
    """Evict edge pods, least QoS loss per unit size first, until ``need`` fits the edge free pool."""
    view = edge_view(state)
    free = view.total_edge_free
    if need.fits_in(free):
        return []
    if edge_totals is None:
        edge_totals = view.total_edge_capacity
    counts = {s: list(v) for s, v in state.service_counts().items()}
    sizes = {s: pod_size(svc, edge_totals) for s, svc in state.services.items()}
    candidates = [(p.pod_id, p.service_id) for p in view.edge_pods]
    freed: list[str] = []
    while candidates and not need.fits_in(free):
        # scores shift after every eviction, so re-rank each round
        score = {s: move_gain(counts[s][0], counts[s][1], state.services[s].qos_target, -1, c) / sizes[s]
                 for s in {s for _, s in candidates}}
        k = min(range(len(candidates)), key=lambda i: (-score[candidates[i][1]], candidates[i][0]))
        pod_id, s = candidates.pop(k)
        freed.append(pod_id)
        free = free + state.services[s].pod_resources
        counts[s][0] -= 1
    return freed


def _best_fit(state: ClusterState, to_edge_pods: Sequence[str], cfg: SchedulerConfig,
              c: QosConstants) -> tuple[list[Migration], bool]:
    need = total(state.pod_resources(p) for p in to_edge_pods)
    edge_totals = edge_capacity_totals(state, cfg.size_normalizer)
    freed = free_edge_as_needed(state, need, c, edge_totals)
    cloud = state.cloud_id
    offloads = [Migration(p, state.pods[p].node_id, cloud) for p in freed]
    after = state.with_locations({p: cloud for p in freed})
    feasible = need.fits_in(edge_view(after).total_edge_free)
    return offloads + reorder_edge(after, cfg), feasible


def best_fit(state: ClusterState, to_edge_pods: Sequence[str], cfg: SchedulerConfig = SchedulerConfig(),
             c: QosConstants = DEFAULT_QOS) -> list[Migration]:
    """Offloads freeing room for ``to_edge_pods``, followed by fragmentation-reducing reorders."""
    return _best_fit(state, to_edge_pods, cfg, c)[0]


# ---------------------------------------------------------------------------
# decisions


def make_decision(state: ClusterState, new_pods: Iterable[str], do_migrate: bool,
                  cfg: SchedulerConfig = SchedulerConfig(), c: QosConstants = DEFAULT_QOS) -> Decision:
    """Pick how many pods of each service go to the edge.

    Candidates are per-service count vectors.  The winner has the highest
    post-decision QoS, then the fewest migrations, then the most edge pods,
    then the lexicographically smallest count vector.
    """
    pods = sorted(set(new_pods))
    for p in pods:
        if state.is_edge(state.pods[p].node_id):
            raise ValueError(f"pod {p} is already on the edge")
    services = sorted({state.pods[p].service_id for p in pods})
    by_service = {s: [p for p in pods if state.pods[p].service_id == s] for s in services}
    view = edge_view(state)
    base_counts = state.service_counts()
    cloud = state.cloud_id

    offload_cache: dict[ResourceVector, tuple[list[Migration], bool]] = {}
    best = None  # (qos, n_migrations, n_edge, vector, to_edge, migrations)
    for vec in itertools.product(*(range(len(by_service[s]) + 1) for s in services)):
        need = total(state.services[s].pod_resources * k for s, k in zip(services, vec)) if vec else ZERO
        if not need.fits_in(view.total_edge_capacity):
            continue
        to_edge = [p for s, k in zip(services, vec) for p in by_service[s][:k]]
        counts = dict(base_counts)
        for s, k in zip(services, vec):
            e, t = counts[s]
            counts[s] = (e + k, t)
        migrations: Optional[list[Migration]] = None
        if do_migrate:
            if need not in offload_cache:
                offload_cache[need] = _best_fit(state, to_edge, cfg, c)
            migrations, feasible = offload_cache[need]
            if not feasible:
                continue
            for m in migrations:
                if m.dest == cloud:
                    s = state.pods[m.pod_id].service_id
                    e, t = counts[s]
                    counts[s] = (e - 1, t)
        elif not need.fits_in(view.total_edge_free):
            continue
        qos = qos_from_counts(counts, state.services, c)
        n_mig = len(migrations) if migrations else 0
        cand = (qos, n_mig, len(to_edge), vec, to_edge, migrations or [])
        if best is None or _better(cand, best):
            best = cand

    assert best is not None  # the all-cloud vector always qualifies
    qos, _, _, _, to_edge, migrations = best
    edge_set = set(to_edge)
    return Decision(tuple(to_edge), tuple(p for p in pods if p not in edge_set),
                    tuple(migrations), {}, qos)


def _better(a, b) -> bool:
    if not qos_close(a[0], b[0]):
        return a[0] > b[0]
    if a[1] != b[1]:
        return a[1] < b[1]
    if a[2] != b[2]:
        return a[2] > b[2]
    return a[3] < b[3]


def immediate_schedule(state: ClusterState, new_pods: Iterable[str],
                       cfg: SchedulerConfig = SchedulerConfig(), c: QosConstants = DEFAULT_QOS) -> Decision:
    """Place new pods without migrating anything."""
    return make_decision(state, new_pods, False, cfg, c)


def suggest(state: ClusterState, cfg: SchedulerConfig = SchedulerConfig(),
            c: QosConstants = DEFAULT_QOS) -> Decision:
    """Greedily pick up to ``m_c2e`` cloud pods for the edge, then decide with migration enabled."""
    view = edge_view(state)
    edge_totals = edge_capacity_totals(state, cfg.size_normalizer)
    free = view.total_edge_free
    counts = {s: list(v) for s, v in state.service_counts().items()}
    sizes = {s: pod_size(svc, edge_totals) for s, svc in state.services.items()}
    candidates = [(p.pod_id, p.service_id) for p in view.cloud_pods]
    chosen: list[str] = []
    while len(chosen) < cfg.m_c2e and candidates:
        score = {s: move_gain(counts[s][0], counts[s][1], state.services[s].qos_target, +1, c) / sizes[s]
                 for s in {s for _, s in candidates}}
        k = min(range(len(candidates)), key=lambda i: (-score[candidates[i][1]], candidates[i][0]))
        pod_id, s = candidates.pop(k)
        r = state.services[s].pod_resources
        if r.fits_in(free):
            chosen.append(pod_id)
            free = free - r
            counts[s][0] += 1
    return make_decision(state, chosen, True, cfg, c)
