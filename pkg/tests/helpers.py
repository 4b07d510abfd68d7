"""Small hand-built clusters shared by the unit tests."""

from edgesched.model import ClusterState, NodeKind, NodeSpec, PodRecord, ResourceVector, ServiceSpec


def tiny_cluster(edges, services, pods=()):
    """``edges``: {id: (cpu, mem)}; ``services``: {id: (cpu, mem[, q])}; pods: (id, service, node)."""
    nodes = tuple(NodeSpec(n, NodeKind.EDGE, ResourceVector(*cap)) for n, cap in edges.items())
    nodes += (NodeSpec("CLOUD", NodeKind.CLOUD),)
    svcs = {s: ServiceSpec(s, ResourceVector(v[0], v[1]), v[2] if len(v) > 2 else 1.0)
            for s, v in services.items()}
    return ClusterState(nodes, svcs, {p: PodRecord(p, s, n) for p, s, n in pods})
