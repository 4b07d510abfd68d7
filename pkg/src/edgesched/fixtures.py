"""Cluster definition files and the default evaluation cluster.

A cluster file is YAML (JSON is a subset) of the form::

    nodes:
      - {id: N2, kind: edge, cpu_cores: 5, memory_gb: 5}
      - {id: N5, kind: cloud, cpu_cores: 22, memory_gb: 17}
    services:
      - {id: A, cpu_millicores: 1000, memory_mib: 950, qos_target: 1.0}

The cloud entry's size is informational only; the cloud is unbounded.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Mapping, Optional

import yaml

from .model import ClusterState, NodeKind, NodeSpec, ResourceVector, ServiceSpec

MIB_PER_GB = 1024

DEFAULT_CLUSTER: dict[str, Any] = {
    "nodes": [
        {"id": "N2", "kind": "edge", "cpu_cores": 5, "memory_gb": 5},
        {"id": "N3", "kind": "edge", "cpu_cores": 4, "memory_gb": 4},
        {"id": "N4", "kind": "edge", "cpu_cores": 7, "memory_gb": 5},
        {"id": "N5", "kind": "cloud", "cpu_cores": 22, "memory_gb": 17},
    ],
    "services": [
        {"id": "A", "cpu_millicores": 1000, "memory_mib": 950, "qos_target": 1.0},
        {"id": "B", "cpu_millicores": 1000, "memory_mib": 1900, "qos_target": 1.0},
        {"id": "C", "cpu_millicores": 1000, "memory_mib": 950, "qos_target": 1.0},
        {"id": "D", "cpu_millicores": 2000, "memory_mib": 1900, "qos_target": 1.0},
    ],
}

# qos_target vectors for services A, B, C, D
QOS_PRESETS: dict[str, tuple[float, ...]] = {
    "Default": (1.0, 1.0, 1.0, 1.0),
    "AllEqual": (0.5, 0.5, 0.5, 0.5),
    "C>A": (0.5, 0.1, 1.0, 0.1),
    "RespectD": (0.1, 0.1, 0.1, 0.5),
}


def cluster_from_dict(data: Mapping[str, Any]) -> ClusterState:
    nodes = []
    for entry in data["nodes"]:
        kind = NodeKind(str(entry["kind"]).lower())
        if kind is NodeKind.CLOUD:
            nodes.append(NodeSpec(str(entry["id"]), kind, None))
        else:
            cap = ResourceVector.of(round(float(entry["cpu_cores"]) * 1000),
                                    round(float(entry["memory_gb"]) * MIB_PER_GB))
            nodes.append(NodeSpec(str(entry["id"]), kind, cap))
    edge_caps = [n.capacity for n in nodes if n.kind is NodeKind.EDGE]
    services = {}
    for entry in data["services"]:
        res = ResourceVector.of(int(entry["cpu_millicores"]), int(entry["memory_mib"]))
        sid = str(entry["id"])
        if sid in services:
            raise ValueError(f"duplicate service {sid!r}")
        services[sid] = ServiceSpec(
            sid, res, float(entry.get("qos_target", 1.0)),
            edge_infeasible=not any(res.fits_in(c) for c in edge_caps))
    return ClusterState(tuple(nodes), services, {})


def cluster_to_dict(state: ClusterState, cloud_size: Optional[tuple[float, float]] = None) -> dict:
    nodes = []
    for n in state.nodes:
        if n.kind is NodeKind.CLOUD:
            cores, gb = cloud_size or (0, 0)
            nodes.append({"id": n.node_id, "kind": "cloud", "cpu_cores": cores, "memory_gb": gb})
        else:
            nodes.append({"id": n.node_id, "kind": "edge",
                          "cpu_cores": n.capacity.cpu / 1000, "memory_gb": n.capacity.mem / MIB_PER_GB})
    services = [{"id": s.service_id, "cpu_millicores": s.pod_resources.cpu,
                 "memory_mib": s.pod_resources.mem, "qos_target": s.qos_target}
                for s in state.services.values()]
    return {"nodes": nodes, "services": services}


def default_cluster() -> ClusterState:
    return cluster_from_dict(DEFAULT_CLUSTER)


def load_cluster(path: str | Path) -> ClusterState:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict) or "nodes" not in data or "services" not in data:
        raise ValueError(f"{path}: cluster file needs 'nodes' and 'services'")
    return cluster_from_dict(data)


def with_qos_targets(state: ClusterState, targets: Mapping[str, float] | tuple[float, ...]) -> ClusterState:
    """Return ``state`` with service QoS targets replaced.

    A tuple is matched positionally against services in definition order.
    """
    from dataclasses import replace

    if not isinstance(targets, Mapping):
        ids = list(state.services)
        if len(targets) != len(ids):
            raise ValueError(f"expected {len(ids)} qos targets, got {len(targets)}")
        targets = dict(zip(ids, targets))
    services = {sid: replace(s, qos_target=float(targets.get(sid, s.qos_target)))
                for sid, s in state.services.items()}
    return replace(state, services=services)
