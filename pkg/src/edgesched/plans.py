"""Placement plans: ordered steps, each confirmed by an API event before the
next one runs.

A migration is create-before-delete: a surge replica is created, bound to
the destination and awaited until running, and only then is the original
deleted.  A failed or cancelled step cancels everything after it, and any
new pod that never got its edge binding is sent to the cloud instead.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

from .events import EventKind, SimEvent
from .matching import match
from .model import ClusterState, ResourceVector
from .scheduler import Decision


class ActionKind(str, Enum):
    AWAIT_CREATION = "AwaitPodCreation"
    BIND = "BindPod"
    DELETE = "DeletePod"


class PlanStatus(str, Enum):
    PENDING = "Pending"
    RUNNING = "Running"
    DONE = "Done"
    CANCELLED = "Cancelled"


@dataclass(frozen=True)
class Step:
    action: ActionKind
    pod_id: str
    service_id: str
    node_id: Optional[str] = None
    # set on the creation/bind steps of a migration replica: the pod it replaces
    surge_of: Optional[str] = None
    await_running: bool = False

    @property
    def verification(self) -> str:
        if self.action is ActionKind.AWAIT_CREATION:
            return f"PodCreated({self.pod_id}, service={self.service_id})"
        if self.action is ActionKind.BIND:
            phase = ", running" if self.await_running else ""
            return f"PodChanged({self.pod_id}, node={self.node_id}{phase})"
        return f"PodDeleted({self.pod_id})"

    def check(self, event: SimEvent) -> Optional[bool]:
        """True if ``event`` verifies this step, False if it contradicts it, None otherwise."""
        if event.pod != self.pod_id:
            return None
        if self.action is ActionKind.AWAIT_CREATION:
            if event.kind is EventKind.POD_CREATED:
                return event.service == self.service_id
            return False if event.kind is EventKind.POD_DELETED else None
        if self.action is ActionKind.BIND:
            if event.kind is EventKind.POD_DELETED:
                return False
            if event.kind is EventKind.POD_CHANGED:
                if event.extra.get("failed") or event.node != self.node_id:
                    return False
                if self.await_running and event.extra.get("phase") != "running":
                    return None
                return True
            return None
        return True if event.kind is EventKind.POD_DELETED else None


@dataclass
class Plan:
    steps: list[Step]
    kind: str = "edge"  # "edge" or "cloud"
    plan_id: Optional[int] = None
    cursor: int = 0
    status: PlanStatus = PlanStatus.PENDING

    @property
    def active(self) -> bool:
        return self.status in (PlanStatus.PENDING, PlanStatus.RUNNING)

    @property
    def current(self) -> Optional[Step]:
        return self.steps[self.cursor] if self.cursor < len(self.steps) else None

    def actions(self) -> list[tuple[str, str, Optional[str]]]:
        return [(s.action.value, s.pod_id, s.node_id) for s in self.steps]


def default_replacement_id(pod_id: str) -> str:
    return f"{pod_id}~m"


def _migration_steps(pod: str, service: str, dest: str, replica: str) -> list[Step]:
    return [Step(ActionKind.AWAIT_CREATION, replica, service, None, surge_of=pod),
            Step(ActionKind.BIND, replica, service, dest, surge_of=pod, await_running=True),
            Step(ActionKind.DELETE, pod, service)]


def plans_from_decision(state: ClusterState, decision: Decision,
                        replacement_id: Callable[[str], str] = default_replacement_id) -> list[Plan]:
    """Turn a decision into one single-step plan per cloud-bound pod and one edge plan.

    The edge plan runs every migration first and then the edge placements.
    Edge targets come from ``decision.targets`` when given, otherwise from a
    fresh match on the post-migration state; pods that cannot be seated are
    demoted to the cloud.
    """
    cloud = state.cloud_id
    service_of = {p: rec.service_id for p, rec in state.pods.items()}
    res = {p: state.services[s].pod_resources for p, s in service_of.items()}
    post = state.with_locations({m.pod_id: m.dest for m in decision.migrations})

    if decision.targets:
        seats = {p: decision.targets[p] for p in decision.to_edge if p in decision.targets}
    else:
        seats = match(post, decision.to_edge).placed

    # replay steps on a resource tally so a move into a still-occupied node
    # is routed through the cloud
    used = dict(state.edge_used())
    caps = {n.node_id: n.capacity for n in state.edge_nodes}

    def fits(node: str, r: ResourceVector) -> bool:
        return (used[node] + r).fits_in(caps[node])

    steps: list[Step] = []
    deferred: list[tuple[str, str, str]] = []
    pending = list(decision.migrations)
    while pending:
        # take any move whose destination already has room; only a cycle of
        # moves needs a detour through the cloud
        k = next((i for i, m in enumerate(pending)
                  if m.dest == cloud or fits(m.dest, res[m.pod_id])), 0)
        m = pending.pop(k)
        r = res[m.pod_id]
        svc = service_of[m.pod_id]
        if m.dest == cloud or fits(m.dest, r):
            steps += _migration_steps(m.pod_id, svc, m.dest, replacement_id(m.pod_id))
            if m.dest != cloud:
                used[m.dest] = used[m.dest] + r
        else:
            hop = replacement_id(m.pod_id)
            steps += _migration_steps(m.pod_id, svc, cloud, hop)
            deferred.append((hop, m.pod_id, m.dest))
        if m.source in used:
            used[m.source] = used[m.source] - r
    for hop, orig, dest in deferred:
        r = res[orig]
        if fits(dest, r):
            steps += _migration_steps(hop, service_of[orig], dest, replacement_id(hop))
            used[dest] = used[dest] + r

    to_cloud = list(decision.to_cloud)
    for p in sorted(decision.to_edge):
        node = seats.get(p)
        if node is None or not fits(node, res[p]):
            to_cloud.append(p)
            continue
        used[node] = used[node] + res[p]
        if state.pods[p].node_id is None:
            steps.append(Step(ActionKind.BIND, p, service_of[p], node))
        else:
            steps += _migration_steps(p, service_of[p], node, replacement_id(p))

    plans = [Plan([Step(ActionKind.BIND, p, service_of[p], cloud)], kind="cloud")
             for p in sorted(to_cloud) if state.pods[p].node_id is None]
    if steps:
        plans.append(Plan(steps, kind="edge"))
    return plans


# ---------------------------------------------------------------------------
# manager


@dataclass
class Directive:
    kind: str  # "advance" | "cancel" | "schedule" | "ignore"
    actions: list[tuple[int, Step]] = field(default_factory=list)
    plans: list[int] = field(default_factory=list)
    note: str = ""


class PlacementManager:
    """Serialised event loop over the active plans."""

    def __init__(self, cloud_id: str, step_timeout: float = 30.0):
        self.cloud_id = cloud_id
        self.step_timeout = step_timeout
        self.plans: dict[int, Plan] = {}
        self.pending_new: list[str] = []
        self.orphans: set[str] = set()
        self.gone: set[str] = set()
        self.bound: dict[str, str] = {}
        self.log: list[dict] = []
        self._ids = itertools.count(1)

    # -- queries ---------------------------------------------------------
    def active(self) -> list[Plan]:
        return [p for p in self.plans.values() if p.active]

    @property
    def edge_busy(self) -> bool:
        return any(p.kind == "edge" for p in self.active())

    def assumed_locations(self) -> dict[str, str]:
        """Pending binds of active plans, as ``pod -> intended node``."""
        out: dict[str, str] = {}
        for plan in self.active():
            for step in plan.steps[plan.cursor:]:
                if step.action is ActionKind.BIND and step.pod_id not in self.bound:
                    out[step.pod_id] = step.node_id
        return out

    def pending_replicas(self) -> list[tuple[str, str, str]]:
        """Migration replicas not created yet: ``(pod, service, target)``."""
        out = []
        for plan in self.active():
            for i, step in enumerate(plan.steps):
                if i >= plan.cursor and step.action is ActionKind.AWAIT_CREATION:
                    target = next(s.node_id for s in plan.steps[i:] if s.action is ActionKind.BIND)
                    out.append((step.pod_id, step.service_id, target))
        return out

    def take_batch(self) -> list[str]:
        batch = [p for p in self.pending_new if p not in self.gone]
        self.pending_new = []
        return batch

    # -- execution -------------------------------------------------------
    def submit(self, plans: list[Plan], now: float) -> list[tuple[int, Step]]:
        """Register plans and return their first actions."""
        actions = []
        for plan in plans:
            plan.plan_id = next(self._ids)
            plan.status = PlanStatus.RUNNING
            self.plans[plan.plan_id] = plan
            actions.extend(self._start_step(plan, now))
        return actions

    def _record(self, now: float, plan: Plan, index: int, step: Optional[Step], result: str) -> None:
        self.log.append({"time": now, "plan_id": plan.plan_id, "step_index": index,
                         "action": step.action.value if step else None,
                         "pod": step.pod_id if step else None,
                         "node": step.node_id if step else None, "result": result})

    def _start_step(self, plan: Plan, now: float) -> list[tuple[int, Step]]:
        step = plan.current
        if step is None:
            plan.status = PlanStatus.DONE
            self._record(now, plan, plan.cursor, None, "done")
            return []
        self._record(now, plan, plan.cursor, step, "issued")
        return [(plan.plan_id, step)]

    def _track(self, event: SimEvent) -> None:
        if event.kind is EventKind.POD_DELETED:
            self.gone.add(event.pod)
            self.bound.pop(event.pod, None)
        elif event.kind is EventKind.POD_CHANGED and not event.extra.get("failed") and event.node:
            self.bound[event.pod] = event.node

    def handle_event(self, event: SimEvent) -> Directive:
        if event.kind not in (EventKind.POD_CREATED, EventKind.POD_CHANGED, EventKind.POD_DELETED) \
                or event.pod is None:
            return Directive("ignore", note=f"malformed or non-pod event {event.kind}")
        self._track(event)
        now = event.time

        if event.kind is EventKind.POD_CREATED and event.pod in self.orphans:
            self.orphans.discard(event.pod)
            return Directive("cancel", actions=[(0, Step(ActionKind.DELETE, event.pod, event.service))],
                             note="replica of a cancelled plan")

        directive = Directive("ignore")
        for plan in self.active():
            verdict = plan.current.check(event) if plan.current else None
            if verdict:
                self._record(now, plan, plan.cursor, plan.current, "verified")
                plan.cursor += 1
                directive.kind = "advance"
                directive.plans.append(plan.plan_id)
                directive.actions.extend(self._start_step(plan, now))
                continue
            if verdict is False or self._contradicts_later(plan, event):
                d = self.cancel(plan, now, f"{event.kind.value} for {event.pod}")
                if directive.kind != "advance":
                    directive.kind = "cancel"
                directive.plans.append(plan.plan_id)
                directive.actions.extend(d.actions)

        if directive.kind == "ignore" and event.kind is EventKind.POD_CREATED \
                and not event.extra.get("surge_of"):
            self.pending_new.append(event.pod)
            directive.kind = "schedule"
        if event.kind is EventKind.POD_DELETED and event.pod in self.pending_new:
            self.pending_new.remove(event.pod)
        return directive

    def _contradicts_later(self, plan: Plan, event: SimEvent) -> bool:
        if event.kind is not EventKind.POD_DELETED:
            return False
        return any(s.pod_id == event.pod for s in plan.steps[plan.cursor + 1:])

    def on_timeout(self, plan_id: int, step_index: int, now: float) -> Directive:
        plan = self.plans.get(plan_id)
        if plan is None or not plan.active or plan.cursor != step_index:
            return Directive("ignore")
        d = self.cancel(plan, now, "step timeout")
        d.plans = [plan_id]
        return d

    def cancel(self, plan: Plan, now: float, reason: str = "") -> Directive:
        """Cancel ``plan``; pending new pods go to the cloud, half-done migrations are settled."""
        plan.status = PlanStatus.CANCELLED
        self._record(now, plan, plan.cursor, plan.current, f"cancelled: {reason}")
        cloud_pods: list[tuple[str, str]] = []
        actions: list[tuple[int, Step]] = []
        steps = plan.steps
        for i, step in enumerate(steps):
            if step.action is ActionKind.BIND and step.surge_of is None:
                if i >= plan.cursor and step.pod_id not in self.gone and step.pod_id not in self.bound:
                    cloud_pods.append((step.pod_id, step.service_id))
            if step.action is not ActionKind.AWAIT_CREATION:
                continue
            replica, original = step.pod_id, step.surge_of
            if i >= plan.cursor:
                if i == plan.cursor:
                    self.orphans.add(replica)
                continue
            j = next(k for k in range(i + 1, len(steps)) if steps[k].action is ActionKind.BIND)
            if j >= plan.cursor:
                if replica not in self.gone:
                    actions.append((plan.plan_id, Step(ActionKind.DELETE, replica, step.service_id)))
                continue
            # replica is running: finish by removing the original
            k = next(k for k in range(j + 1, len(steps)) if steps[k].action is ActionKind.DELETE)
            if k > plan.cursor and original not in self.gone:
                actions.append((plan.plan_id, Step(ActionKind.DELETE, original, step.service_id)))
        new_plans = [Plan([Step(ActionKind.BIND, p, s, self.cloud_id)], kind="cloud")
                     for p, s in cloud_pods]
        actions.extend(self.submit(new_plans, now))
        return Directive("cancel", actions=actions, plans=[plan.plan_id], note=reason)
