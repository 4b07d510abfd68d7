"""Cluster domain types: resource vectors, nodes, services, pods and the
allocation snapshot every scheduling routine reads and transforms.

CPU is counted in integer millicores and memory in integer MiB so every
capacity check is exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Mapping, NamedTuple, Optional


class CapacityError(ValueError):
    """A placement would overload an edge node."""

    def __init__(self, node_id: str, message: str):
        super().__init__(message)
        self.node_id = node_id


class ResourceVector(NamedTuple):
    cpu: int = 0
    mem: int = 0

    def __add__(self, other):  # type: ignore[override]
        return ResourceVector(self.cpu + other.cpu, self.mem + other.mem)

    def __sub__(self, other):
        cpu, mem = self.cpu - other.cpu, self.mem - other.mem
        if cpu < 0 or mem < 0:
            raise ValueError(f"negative resources: {self} - {other}")
        return ResourceVector(cpu, mem)

    def __mul__(self, k):  # type: ignore[override]
        return ResourceVector(self.cpu * k, self.mem * k)

    __rmul__ = __mul__

    def fits_in(self, other: "ResourceVector") -> bool:
        """Component-wise ``self <= other``."""
        return self.cpu <= other.cpu and self.mem <= other.mem

    # partial order, not the lexicographic tuple order
    def __le__(self, other):  # type: ignore[override]
        return self.fits_in(other)

    def __ge__(self, other):  # type: ignore[override]
        return other.fits_in(self)

    def __lt__(self, other):  # type: ignore[override]
        return self.fits_in(other) and tuple(self) != tuple(other)

    def __gt__(self, other):  # type: ignore[override]
        return other.fits_in(self) and tuple(self) != tuple(other)

    @property
    def cpu_millicores(self) -> int:
        return self.cpu

    @property
    def memory_mib(self) -> int:
        return self.mem

    @classmethod
    def of(cls, cpu: int, mem: int) -> "ResourceVector":
        if cpu < 0 or mem < 0:
            raise ValueError(f"resources must be non-negative, got ({cpu}, {mem})")
        return cls(int(cpu), int(mem))


ZERO = ResourceVector(0, 0)


def total(vectors: Iterable[ResourceVector]) -> ResourceVector:
    cpu = mem = 0
    for v in vectors:
        cpu += v.cpu
        mem += v.mem
    return ResourceVector(cpu, mem)


class NodeKind(str, Enum):
    EDGE = "edge"
    CLOUD = "cloud"


@dataclass(frozen=True)
class NodeSpec:
    node_id: str
    kind: NodeKind
    # None on the cloud node: unbounded, no accounting kept
    capacity: Optional[ResourceVector] = None

    def __post_init__(self):
        if self.kind is NodeKind.EDGE:
            if self.capacity is None or self.capacity.cpu <= 0 or self.capacity.mem <= 0:
                raise ValueError(f"edge node {self.node_id} needs a strictly positive capacity")

    @property
    def is_edge(self) -> bool:
        return self.kind is NodeKind.EDGE


@dataclass(frozen=True)
class ServiceSpec:
    service_id: str
    pod_resources: ResourceVector
    qos_target: float = 1.0
    edge_infeasible: bool = False

    def __post_init__(self):
        if not 0.0 <= self.qos_target <= 1.0:
            raise ValueError(f"qos_target of {self.service_id} must lie in [0, 1]")


@dataclass(frozen=True)
class PodRecord:
    pod_id: str
    service_id: str
    # None while pending, otherwise the id of the hosting node (edge or cloud)
    node_id: Optional[str] = None

    @property
    def pending(self) -> bool:
        return self.node_id is None


@dataclass(frozen=True)
class ClusterState:
    """Immutable snapshot of nodes, services and the pod -> node mapping.

    Treat the mappings as read-only; every transforming operation returns a
    new state.
    """

    nodes: tuple[NodeSpec, ...]
    services: Mapping[str, ServiceSpec]
    pods: Mapping[str, PodRecord] = field(default_factory=dict)

    def __post_init__(self):
        clouds = [n for n in self.nodes if n.kind is NodeKind.CLOUD]
        if len(clouds) != 1:
            raise ValueError(f"a cluster needs exactly one cloud node, got {len(clouds)}")
        ids = [n.node_id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate node ids")

    # -- lookups ---------------------------------------------------------
    @property
    def cloud_id(self) -> str:
        for n in self.nodes:
            if n.kind is NodeKind.CLOUD:
                return n.node_id
        raise AssertionError("unreachable")

    @property
    def edge_nodes(self) -> tuple[NodeSpec, ...]:
        return tuple(n for n in self.nodes if n.kind is NodeKind.EDGE)

    def node(self, node_id: str) -> NodeSpec:
        for n in self.nodes:
            if n.node_id == node_id:
                return n
        raise KeyError(f"unknown node {node_id!r}")

    def is_edge(self, node_id: Optional[str]) -> bool:
        if node_id is None:
            return False
        return self.node(node_id).kind is NodeKind.EDGE

    def is_cloud(self, node_id: Optional[str]) -> bool:
        return node_id is not None and node_id == self.cloud_id

    def pod_resources(self, pod_id: str) -> ResourceVector:
        return self.services[self.pods[pod_id].service_id].pod_resources

    def pods_on(self, node_id: str) -> list[PodRecord]:
        return [p for p in self.pods.values() if p.node_id == node_id]

    def service_pods(self, service_id: str) -> list[PodRecord]:
        return [p for p in self.pods.values() if p.service_id == service_id]

    def edge_used(self) -> dict[str, ResourceVector]:
        """Used resources per edge node, keyed by node id."""
        used = {n.node_id: ZERO for n in self.edge_nodes}
        for p in self.pods.values():
            if p.node_id in used:
                used[p.node_id] = used[p.node_id] + self.services[p.service_id].pod_resources
        return used

    def service_counts(self) -> dict[str, tuple[int, int]]:
        """``service_id -> (pods on edge, all pods)``; pending pods count as not-on-edge."""
        edge_ids = {n.node_id for n in self.edge_nodes}
        counts = {s: [0, 0] for s in self.services}
        for p in self.pods.values():
            c = counts[p.service_id]
            c[1] += 1
            if p.node_id in edge_ids:
                c[0] += 1
        return {s: (e, t) for s, (e, t) in counts.items()}

    # -- transforms ------------------------------------------------------
    def with_locations(self, moves: Mapping[str, Optional[str]]) -> "ClusterState":
        """Relocate pods without capacity validation (hypothetical states)."""
        if not moves:
            return self
        pods = dict(self.pods)
        for pod_id, loc in moves.items():
            pods[pod_id] = replace(pods[pod_id], node_id=loc)
        return replace(self, pods=pods)

    def with_pods(self, new: Iterable[PodRecord]) -> "ClusterState":
        pods = dict(self.pods)
        for p in new:
            if p.service_id not in self.services:
                raise KeyError(f"unknown service {p.service_id!r}")
            pods[p.pod_id] = p
        return replace(self, pods=pods)

    def without_pods(self, pod_ids: Iterable[str]) -> "ClusterState":
        pods = dict(self.pods)
        for pid in pod_ids:
            pods.pop(pid, None)
        return replace(self, pods=pods)

    def validate(self) -> None:
        """Raise :class:`CapacityError` if any edge node is over capacity."""
        for n in self.edge_nodes:
            used = self.edge_used()[n.node_id]
            if not used.fits_in(n.capacity):
                raise CapacityError(n.node_id, f"node {n.node_id} over capacity: {used} > {n.capacity}")
        for p in self.pods.values():
            if p.node_id is not None:
                self.node(p.node_id)


def free_resources(state: ClusterState, node_id: str) -> ResourceVector:
    node = state.node(node_id)
    if node.kind is NodeKind.CLOUD:
        raise ValueError("the cloud node is unbounded; free resources are undefined")
    used = total(state.services[p.service_id].pod_resources for p in state.pods.values()
                 if p.node_id == node_id)
    return node.capacity - used


class EdgeView(NamedTuple):
    edge_pods: list[PodRecord]
    cloud_pods: list[PodRecord]
    total_edge_capacity: ResourceVector
    total_edge_free: ResourceVector


def edge_view(state: ClusterState) -> EdgeView:
    """Partition pods by location (sorted by pod id) and total edge capacity/free."""
    cloud = state.cloud_id
    edge_ids = {n.node_id for n in state.edge_nodes}
    pods = sorted(state.pods.values(), key=lambda p: p.pod_id)
    edge_pods = [p for p in pods if p.node_id in edge_ids]
    cloud_pods = [p for p in pods if p.node_id == cloud]
    cap = total(n.capacity for n in state.edge_nodes)
    used = total(state.services[p.service_id].pod_resources for p in edge_pods)
    return EdgeView(edge_pods, cloud_pods, cap, cap - used)


def edge_capacity_totals(state: ClusterState, normalizer: str = "total") -> ResourceVector:
    """Edge-pool size used to normalise pod sizes.

    ``"total"`` sums all edge nodes; ``"largest"`` takes the per-component
    maximum over edge nodes.
    """
    caps = [n.capacity for n in state.edge_nodes]
    if not caps:
        return ZERO
    if normalizer == "total":
        return total(caps)
    if normalizer == "largest":
        return ResourceVector(max(c.cpu for c in caps), max(c.mem for c in caps))
    raise ValueError(f"unknown size normalizer {normalizer!r}")


def apply_allocation_delta(state: ClusterState,
                           moves: Iterable[tuple[str, Optional[str]]]) -> ClusterState:
    """Apply all moves atomically; reject the whole batch on any capacity violation."""
    moves = list(moves)
    for pod_id, loc in moves:
        if pod_id not in state.pods:
            raise KeyError(f"unknown pod {pod_id!r}")
        if loc is not None:
            state.node(loc)
    new = state.with_locations(dict(moves))
    used = new.edge_used()
    for n in new.edge_nodes:
        if not used[n.node_id].fits_in(n.capacity):
            raise CapacityError(
                n.node_id, f"moves overload node {n.node_id}: {used[n.node_id]} > {n.capacity}")
    return new
