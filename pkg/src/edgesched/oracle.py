"""Exhaustive solvers for small instances.

These enumerate every location assignment and exist to check the
heuristics; they refuse instances beyond their size bounds rather than
truncating the search.
"""

from __future__ import annotations

import itertools
from typing import Iterable

from .matching import Matching
from .model import ClusterState
from .objective import DEFAULT_QOS, QosConstants, qos_close, service_qos

MAX_EDGE_NODES = 3
MAX_MATCH_PODS = 6
MAX_ALLOC_PODS = 8


class InstanceTooLarge(ValueError):
    pass


def _check_edges(state: ClusterState) -> None:
    if len(state.edge_nodes) > MAX_EDGE_NODES:
        raise InstanceTooLarge(f"oracle handles at most {MAX_EDGE_NODES} edge nodes, "
                               f"got {len(state.edge_nodes)}")


def brute_force_match(state: ClusterState, new_pods: Iterable[str]) -> Matching:
    """Try every (edge nodes + cloud)^n assignment; most pods on edge, then least fragmentation."""
    _check_edges(state)
    pods = sorted(set(new_pods))
    if len(pods) > MAX_MATCH_PODS:
        raise InstanceTooLarge(f"brute-force match handles at most {MAX_MATCH_PODS} pods, got {len(pods)}")
    edges = state.edge_nodes
    cloud = state.cloud_id
    base_cpu = {n.node_id: 0 for n in edges}
    base_mem = {n.node_id: 0 for n in edges}
    for p in state.pods.values():
        if p.pod_id in pods or p.node_id not in base_cpu:
            continue
        r = state.services[p.service_id].pod_resources
        base_cpu[p.node_id] += r.cpu
        base_mem[p.node_id] += r.mem
    res = [state.services[state.pods[p].service_id].pod_resources for p in pods]
    options = [n.node_id for n in edges] + [cloud]

    best = None
    for assign in itertools.product(options, repeat=len(pods)):
        cpu = dict(base_cpu)
        mem = dict(base_mem)
        placed = 0
        for r, where in zip(res, assign):
            if where != cloud:
                cpu[where] += r.cpu
                mem[where] += r.mem
                placed += 1
        if any(cpu[n.node_id] > n.capacity.cpu or mem[n.node_id] > n.capacity.mem for n in edges):
            continue
        frag = sum(1.0 - (cpu[n.node_id] / n.capacity.cpu) * (mem[n.node_id] / n.capacity.mem)
                   for n in edges)
        if best is None or placed > best[0] or (placed == best[0] and frag < best[1]):
            best = (placed, frag, assign)
    assert best is not None  # all-cloud is always feasible
    return Matching(dict(zip(pods, best[2])), best[1], cloud)


def exact_allocate(state: ClusterState, new_pods: Iterable[str],
                   c: QosConstants = DEFAULT_QOS) -> tuple[dict[str, str], float, int]:
    """Globally optimal (max QoS, then min migrations) allocation of every pod.

    Existing pods may be moved; new pods must be placed (edge or cloud).
    Returns ``(allocation, qos, migrations)``.
    """
    _check_edges(state)
    new = set(new_pods)
    pods = sorted(state.pods)
    if len(pods) > MAX_ALLOC_PODS:
        raise InstanceTooLarge(f"exact allocation handles at most {MAX_ALLOC_PODS} pods, got {len(pods)}")
    edges = state.edge_nodes
    edge_ids = [n.node_id for n in edges]
    cloud = state.cloud_id
    options = edge_ids + [cloud]
    res = [state.services[state.pods[p].service_id].pod_resources for p in pods]
    service_of = [state.pods[p].service_id for p in pods]
    before = [state.pods[p].node_id for p in pods]
    n_pods = {s: 0 for s in state.services}
    for s in service_of:
        n_pods[s] += 1

    best = None
    for assign in itertools.product(options, repeat=len(pods)):
        cpu = dict.fromkeys(edge_ids, 0)
        mem = dict.fromkeys(edge_ids, 0)
        on_edge = dict.fromkeys(state.services, 0)
        for r, s, where in zip(res, service_of, assign):
            if where != cloud:
                cpu[where] += r.cpu
                mem[where] += r.mem
                on_edge[s] += 1
        if any(cpu[n.node_id] > n.capacity.cpu or mem[n.node_id] > n.capacity.mem for n in edges):
            continue
        qos = sum(service_qos(on_edge[s], n_pods[s], svc.qos_target, c)
                  for s, svc in state.services.items())
        moves = 0
        for pid, old, where in zip(pods, before, assign):
            if pid in new:
                continue
            old_e = old if old in edge_ids else None
            new_e = where if where in edge_ids else None
            if old_e != new_e:
                moves += 1
        if best is None:
            better = True
        elif qos_close(qos, best[0]):
            better = moves < best[1]
        else:
            better = qos > best[0]
        if better:
            best = (qos, moves, assign)
    assert best is not None
    return dict(zip(pods, best[2])), best[0], best[1]
