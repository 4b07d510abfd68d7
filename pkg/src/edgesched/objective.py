"""QoS, migration and fragmentation objectives plus the per-pod scores the
scheduler ranks candidates by.

QoS only depends on how many pods of each service sit on edge nodes, so
most helpers come in two flavours: one over a :class:`ClusterState` and a
count-based one the scheduler uses in its inner loops.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

from .model import ClusterState, NodeKind, ResourceVector, ServiceSpec, edge_capacity_totals

REL_TOL = 1e-9


@dataclass(frozen=True)
class QosConstants:
    alpha: float = 100.0
    beta: float = 1.0
    gamma: float = 10000.0

    def __post_init__(self):
        if not (0 <= self.beta < self.alpha):
            raise ValueError(f"need 0 <= beta < alpha, got beta={self.beta}, alpha={self.alpha}")
        if self.gamma < 100 * self.alpha:
            raise ValueError(f"need gamma >= 100 * alpha, got gamma={self.gamma}, alpha={self.alpha}")

    def scaled(self, k: float) -> "QosConstants":
        return QosConstants(self.alpha * k, self.beta * k, self.gamma * k)


DEFAULT_QOS = QosConstants()


def f_transform(x: float, c: QosConstants = DEFAULT_QOS) -> float:
    if x < 0:
        return c.alpha * x
    return c.beta * x + c.gamma


def delta_from_counts(on_edge: int, n_pods: int, qos_target: float) -> float:
    # a service scaled to zero counts as fully satisfied
    if n_pods == 0:
        return 1.0 - qos_target
    return on_edge / n_pods - qos_target


def service_qos(on_edge: int, n_pods: int, qos_target: float, c: QosConstants = DEFAULT_QOS) -> float:
    return f_transform(delta_from_counts(on_edge, n_pods, qos_target), c)


def qos_from_counts(counts: Mapping[str, tuple[int, int]], services: Mapping[str, ServiceSpec],
                    c: QosConstants = DEFAULT_QOS) -> float:
    return sum(service_qos(e, t, services[s].qos_target, c) for s, (e, t) in counts.items())


def delta(state: ClusterState, service_id: str) -> float:
    on_edge, n = state.service_counts()[service_id]
    return delta_from_counts(on_edge, n, state.services[service_id].qos_target)


def qos_total(state: ClusterState, c: QosConstants = DEFAULT_QOS) -> float:
    return qos_from_counts(state.service_counts(), state.services, c)


def migration_count(before: ClusterState, after: ClusterState,
                    exclude_new: Iterable[str] = ()) -> int:
    """Number of migrations between two allocations, new pods excluded.

    An edge->edge move and an edge<->cloud move each count once.
    """
    exclude = set(exclude_new)
    pods_before = set(before.pods) - exclude
    pods_after = set(after.pods) - exclude
    if pods_before != pods_after:
        raise ValueError("pod sets differ outside the excluded new pods: "
                         f"{sorted(pods_before ^ pods_after)}")
    edge_ids = {n.node_id for n in before.edge_nodes} | {n.node_id for n in after.edge_nodes}
    doubled = 0
    for pid in pods_before:
        old, new = before.pods[pid].node_id, after.pods[pid].node_id
        old = old if old in edge_ids else None
        new = new if new in edge_ids else None
        if old == new:
            continue
        # per-node indicator differences, then the edge-membership difference
        per_node = (old is not None) + (new is not None)
        membership = abs((new is not None) - (old is not None))
        doubled += per_node + membership
    return doubled // 2


def node_fragmentation(used: ResourceVector, capacity: ResourceVector) -> float:
    return 1.0 - (used.cpu / capacity.cpu) * (used.mem / capacity.mem)


def fragmentation(state: ClusterState) -> float:
    """Sum over edge nodes of ``1 - cpu_used_frac * mem_used_frac``."""
    used = state.edge_used()
    return sum(node_fragmentation(used[n.node_id], n.capacity) for n in state.edge_nodes)


def pod_size(service: ServiceSpec, edge_totals: ResourceVector) -> float:
    if edge_totals.cpu <= 0 or edge_totals.mem <= 0:
        raise ValueError("edge capacity must be strictly positive to size pods")
    r = service.pod_resources
    return math.sqrt((r.cpu / edge_totals.cpu) * (r.mem / edge_totals.mem))


def move_gain(on_edge: int, n_pods: int, qos_target: float, direction: int,
              c: QosConstants = DEFAULT_QOS) -> float:
    """QoS change of one service when one of its pods moves to (+1) or off (-1) the edge."""
    return (service_qos(on_edge + direction, n_pods, qos_target, c)
            - service_qos(on_edge, n_pods, qos_target, c))


def _score(state: ClusterState, pod_id: str, c: QosConstants, direction: int,
           edge_totals: Optional[ResourceVector]) -> float:
    pod = state.pods[pod_id]
    service = state.services[pod.service_id]
    on_edge, n = state.service_counts()[pod.service_id]
    if edge_totals is None:
        edge_totals = edge_capacity_totals(state)
    return move_gain(on_edge, n, service.qos_target, direction, c) / pod_size(service, edge_totals)


def suggest_score(state: ClusterState, pod_id: str, c: QosConstants = DEFAULT_QOS,
                  edge_totals: Optional[ResourceVector] = None) -> float:
    """QoS gained per unit of pod size by moving a cloud pod onto the edge."""
    if state.pods[pod_id].node_id != state.cloud_id:
        raise ValueError(f"pod {pod_id} is not on the cloud")
    return _score(state, pod_id, c, +1, edge_totals)


def free_score(state: ClusterState, pod_id: str, c: QosConstants = DEFAULT_QOS,
               edge_totals: Optional[ResourceVector] = None) -> float:
    """QoS change per unit of pod size from evicting an edge pod to the cloud (<= 0)."""
    loc = state.pods[pod_id].node_id
    if loc is None or state.node(loc).kind is not NodeKind.EDGE:
        raise ValueError(f"pod {pod_id} is not on an edge node")
    return _score(state, pod_id, c, -1, edge_totals)


def qos_close(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=REL_TOL, abs_tol=REL_TOL)
