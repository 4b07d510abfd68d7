import csv
import io

import pytest

from edgesched.fixtures import default_cluster
from edgesched.metrics import CSV_COLUMNS, compute_metrics, metrics_csv
from edgesched.simulator import SimulationTrace, run
from edgesched.workload import Scenario

NODES = {"E": "edge", "E2": "edge", "C": "cloud"}


def rec(t, event, pod=None, service=None, node=None, **extra):
    return {"t": t, "event": event, "pod": pod, "service": service, "node": node, "extra": extra}


def hand_trace():
    return SimulationTrace([
        rec(0.0, "init", nodes=NODES, services=["A", "B"], scheduler="x", scenario="s", seed=4,
            pods={"A-1": ["A", "E"], "B-1": ["B", "C"]}),
        rec(10.0, "PodChanged", "A-2", "A", "C", phase="running"),
        rec(12.0, "Migration", "A-1", "A", "E2", replica="A-3", src="E", dst="E2",
            src_kind="edge", dst_kind="edge"),
        rec(14.0, "Migration", "B-1", "B", "E", replica="B-2", src="C", dst="E",
            src_kind="cloud", dst_kind="edge"),
        rec(15.0, "PodChanged", "B-2", "B", "E", phase="running"),
        rec(15.0, "PodDeleted", "B-1", "B", "C"),
        rec(20.0, "end"),
    ])


def test_time_weighted_edge_ratio():
    rep = compute_metrics(hand_trace())
    # A: edge only for 10s, half edge for 10s; B: cloud for 15s, edge for 5s
    assert rep.per_deployment_edge_ratio == {"A": pytest.approx(75.0), "B": pytest.approx(25.0)}
    assert rep.mean_edge_ratio == pytest.approx(50.0)
    assert rep.edge_ratio_stddev == pytest.approx(25.0)
    assert rep.per_kind_migrations == {"intra": 1, "e2c": 0, "c2e": 1}
    assert rep.total_migrations == 2
    assert (rep.scenario, rep.scheduler, rep.seed) == ("s", "x", 4)


def test_services_without_running_pods_skip_those_intervals():
    trace = SimulationTrace([
        rec(0.0, "init", nodes=NODES, services=["A"], pods={}),
        rec(5.0, "PodChanged", "A-1", "A", "E", phase="running"),
        rec(6.0, "PodChanged", "A-1", "A", "E", phase="terminating"),
        rec(10.0, "end"),
    ])
    assert compute_metrics(trace).per_deployment_edge_ratio == {"A": 100.0}


def test_bad_traces_rejected():
    with pytest.raises(ValueError):
        compute_metrics(SimulationTrace([]))
    with pytest.raises(ValueError):
        compute_metrics(SimulationTrace([rec(0.0, "end")]))


def test_csv_layout():
    rep = compute_metrics(hand_trace())
    text = metrics_csv([rep])
    rows = list(csv.DictReader(io.StringIO(text)))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert [r["service"] for r in rows] == ["A", "B"]
    assert rows[0]["edge_ratio"] == "75.000000"
    extra = metrics_csv([rep], [{"seed": 4}])
    assert extra.splitlines()[0].startswith("scenario,scheduler,seed,service")
    with pytest.raises(ValueError):
        metrics_csv([rep], [])


def test_cloud_first_scores_zero_and_kubedsm_positive():
    scen = Scenario.from_name("1.3_0.4", cycles=4)
    cf = compute_metrics(run(default_cluster(), scen, "cf"))
    assert cf.mean_edge_ratio == 0.0
    ours = compute_metrics(run(default_cluster(), scen, "kubedsm"))
    assert 0 < ours.mean_edge_ratio <= 100
