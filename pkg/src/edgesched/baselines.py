"""Reference schedulers placing one pod at a time, never migrating.

* BEF: first fit over edge nodes, biggest node first.
* SEF: first fit, smallest node first.
* CF: everything on the cloud.
* SpreadDefault: the edge node left with the most balanced free room
  (least-allocated spreading restricted to edge nodes).
"""

from __future__ import annotations

from enum import Enum
from typing import Iterable

from .model import ClusterState
from .scheduler import Decision


class BaselinePolicy(str, Enum):
    BIGGEST_EDGE_FIRST = "bef"
    SMALLEST_EDGE_FIRST = "sef"
    CLOUD_FIRST = "cf"
    SPREAD_DEFAULT = "k8s"


def _size_key(node):
    return (node.capacity.cpu, node.capacity.mem)


def baseline_schedule(state: ClusterState, new_pods: Iterable[str], policy: BaselinePolicy) -> Decision:
    policy = BaselinePolicy(policy)
    pods = sorted(set(new_pods))
    edges = list(state.edge_nodes)
    if policy is BaselinePolicy.BIGGEST_EDGE_FIRST:
        # node id ascending breaks size ties
        order = sorted(edges, key=lambda n: n.node_id)
        order = sorted(order, key=_size_key, reverse=True)
    elif policy is BaselinePolicy.SMALLEST_EDGE_FIRST:
        order = sorted(edges, key=lambda n: (_size_key(n), n.node_id))
    else:
        order = sorted(edges, key=lambda n: n.node_id)
    used = state.edge_used()
    free = {n.node_id: n.capacity - used[n.node_id] for n in edges}

    targets: dict[str, str] = {}
    to_cloud: list[str] = []
    for p in pods:
        r = state.pod_resources(p)
        chosen = None
        if policy is BaselinePolicy.CLOUD_FIRST:
            pass
        elif policy is BaselinePolicy.SPREAD_DEFAULT:
            best = -1.0
            for n in order:
                if r.fits_in(free[n.node_id]):
                    left = free[n.node_id] - r
                    balance = min(left.cpu / n.capacity.cpu, left.mem / n.capacity.mem)
                    if balance > best:
                        best, chosen = balance, n.node_id
        else:
            chosen = next((n.node_id for n in order if r.fits_in(free[n.node_id])), None)
        if chosen is None:
            to_cloud.append(p)
        else:
            targets[p] = chosen
            free[chosen] = free[chosen] - r
    to_edge = tuple(p for p in pods if p in targets)
    return Decision(to_edge, tuple(to_cloud), (), targets)

