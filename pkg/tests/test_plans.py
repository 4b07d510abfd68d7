from edgesched.events import EventKind, SimEvent
from edgesched.oracle import brute_force_match
from edgesched.plans import ActionKind, PlacementManager, PlanStatus, Step, plans_from_decision
from edgesched.scheduler import Decision, Migration, immediate_schedule

from conftest import place
from helpers import tiny_cluster


def ev(kind, pod, node=None, t=1.0, **extra):
    return SimEvent(t, 0, kind, pod, "A", node, extra)


def test_all_cloud_decision(cluster):
    s = place(cluster, *[(f"n{i}", "A", None) for i in range(3)])
    plans = plans_from_decision(s, Decision((), ("n0", "n1", "n2")))
    assert len(plans) == 3
    assert all(p.kind == "cloud" and p.actions() == [("BindPod", p.steps[0].pod_id, "N5")] for p in plans)


def test_single_pod_single_bind(cluster):
    s = place(cluster, ("n1", "A", None))
    plans = plans_from_decision(s, immediate_schedule(s, ["n1"]))
    assert len(plans) == 1
    (step,) = plans[0].steps
    assert step.action is ActionKind.BIND and s.is_edge(step.node_id)


def test_strict_subset_split():
    s = tiny_cluster({"E": (2000, 2000)}, {"A": (1000, 1000)}, [(f"n{i}", "A", None) for i in range(3)])
    plans = plans_from_decision(s, immediate_schedule(s, ["n0", "n1", "n2"]))
    edge = [p for p in plans if p.kind == "edge"]
    cloud = [p for p in plans if p.kind == "cloud"]
    assert [a[1:] for a in edge[0].actions()] == [("n0", "E"), ("n1", "E")]
    assert [p.steps[0].pod_id for p in cloud] == ["n2"]


def test_unseatable_pod_is_demoted():
    s = tiny_cluster({"E1": (1000, 1000), "E2": (1000, 1000)}, {"A": (500, 500), "W": (2000, 500)},
                     [("a", "A", None), ("w", "W", None)])
    # the pooled room (2000, 2000) admits both, no single node seats w
    assert len(brute_force_match(s, ["a", "w"]).placed) == 1
    plans = plans_from_decision(s, Decision(("a", "w"), ()))
    kinds = {p.steps[-1].pod_id: p.kind for p in plans}
    assert kinds == {"a": "edge", "w": "cloud"}


def test_migration_is_create_before_delete(cluster):
    s = place(cluster, ("a1", "A", "N2"))
    (plan,) = plans_from_decision(s, Decision(migrations=(Migration("a1", "N2", "N3"),)))
    assert [st.action for st in plan.steps] == [ActionKind.AWAIT_CREATION, ActionKind.BIND, ActionKind.DELETE]
    create, bind, delete = plan.steps
    assert create.pod_id == bind.pod_id == "a1~m" and create.surge_of == "a1"
    assert bind.node_id == "N3" and bind.await_running
    assert delete.pod_id == "a1"


def test_swap_detours_through_cloud():
    # two full nodes exchanging pods: one move must wait in the cloud
    s = tiny_cluster({"E1": (1000, 1000), "E2": (1000, 1000)}, {"A": (1000, 1000)},
                     [("p", "A", "E1"), ("q", "A", "E2")])
    d = Decision(migrations=(Migration("p", "E1", "E2"), Migration("q", "E2", "E1")))
    (plan,) = plans_from_decision(s, d)
    binds = [(st.pod_id, st.node_id) for st in plan.steps if st.action is ActionKind.BIND]
    assert binds == [("p~m", "CLOUD"), ("q~m", "E1"), ("p~m~m", "E2")]


def test_ready_move_goes_first():
    s = tiny_cluster({"E1": (1000, 1000), "E2": (1000, 1000), "E3": (1000, 1000)}, {"A": (1000, 1000)},
                     [("p", "A", "E1"), ("q", "A", "E2")])
    d = Decision(migrations=(Migration("p", "E1", "E2"), Migration("q", "E2", "E3")))
    (plan,) = plans_from_decision(s, d)
    binds = [(st.pod_id, st.node_id) for st in plan.steps if st.action is ActionKind.BIND]
    assert binds == [("q~m", "E3"), ("p~m", "E2")]


def test_step_check():
    bind = Step(ActionKind.BIND, "x", "A", "N2", await_running=True)
    assert bind.check(ev(EventKind.POD_CHANGED, "x", "N2", phase="starting")) is None
    assert bind.check(ev(EventKind.POD_CHANGED, "x", "N2", phase="running")) is True
    assert bind.check(ev(EventKind.POD_CHANGED, "x", "N3", phase="running")) is False
    assert bind.check(ev(EventKind.POD_CHANGED, "y", "N2", phase="running")) is None
    assert Step(ActionKind.DELETE, "x", "A").check(ev(EventKind.POD_DELETED, "x")) is True
    assert "PodCreated" in Step(ActionKind.AWAIT_CREATION, "x", "A").verification


def test_manager_advances_on_matching_event(cluster):
    s = place(cluster, ("n1", "A", None), ("n2", "A", None))
    mgr = PlacementManager("N5")
    plans = plans_from_decision(s, immediate_schedule(s, ["n1", "n2"]))
    first = mgr.submit(plans, 0.0)
    assert [st.pod_id for _, st in first] == ["n1"]
    node = first[0][1].node_id
    assert mgr.handle_event(ev(EventKind.POD_CHANGED, "zz", node)).kind == "ignore"
    d = mgr.handle_event(ev(EventKind.POD_CHANGED, "n1", node))
    assert d.kind == "advance" and [st.pod_id for _, st in d.actions] == ["n2"]
    d = mgr.handle_event(ev(EventKind.POD_CHANGED, "n2", d.actions[0][1].node_id))
    assert d.actions == [] and plans[0].status is PlanStatus.DONE
    assert not mgr.active()


def test_manager_failed_bind_sends_rest_to_cloud(cluster):
    s = place(cluster, ("n1", "A", None), ("n2", "A", None))
    mgr = PlacementManager("N5")
    first = mgr.submit(plans_from_decision(s, immediate_schedule(s, ["n1", "n2"])), 0.0)
    node = first[0][1].node_id
    d = mgr.handle_event(ev(EventKind.POD_CHANGED, "n1", node, failed=True))
    assert d.kind == "cancel"
    assert sorted((st.pod_id, st.node_id) for _, st in d.actions) == [("n1", "N5"), ("n2", "N5")]


def test_manager_queues_new_pods():
    mgr = PlacementManager("N5")
    assert mgr.handle_event(ev(EventKind.POD_CREATED, "n1")).kind == "schedule"
    assert mgr.handle_event(ev(EventKind.POD_CREATED, "r1", surge_of="x")).kind == "ignore"
    mgr.handle_event(ev(EventKind.POD_CREATED, "n2"))
    mgr.handle_event(ev(EventKind.POD_DELETED, "n2"))
    assert mgr.take_batch() == ["n1"]
    assert mgr.take_batch() == []


def test_manager_timeout_cancels(cluster):
    s = place(cluster, ("a1", "A", "N2"))
    mgr = PlacementManager("N5")
    (plan,) = plans_from_decision(s, Decision(migrations=(Migration("a1", "N2", "N3"),)))
    mgr.submit([plan], 0.0)
    assert mgr.on_timeout(plan.plan_id, 5, 30.0).kind == "ignore"
    d = mgr.on_timeout(plan.plan_id, 0, 30.0)
    assert d.kind == "cancel" and plan.status is PlanStatus.CANCELLED
    # the replica is created after all and must be removed again
    late = mgr.handle_event(ev(EventKind.POD_CREATED, "a1~m", surge_of="a1"))
    assert late.kind == "cancel" and late.actions[0][1].action is ActionKind.DELETE
