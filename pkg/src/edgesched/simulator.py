"""Discrete-event emulation of the cluster control loop.

The world holds pods with a lifecycle phase (pending, starting, running,
terminating).  A target-driven replica controller creates and deletes pods,
new pods are batched and handed to the active scheduler, and the placement
manager turns decisions into plans whose steps are confirmed by the pod
events the world emits.  Everything observable is written to a trace of
flat records ``{t, event, pod, service, node, extra}``.
"""

from __future__ import annotations

import heapq
import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Optional

from .baselines import BaselinePolicy, baseline_schedule
from .events import EventKind, SimEvent
from .model import ClusterState, PodRecord, ResourceVector
from .objective import DEFAULT_QOS, QosConstants, delta_from_counts
from .plans import ActionKind, Directive, PlacementManager, Plan, Step, plans_from_decision
from .scheduler import VARIANTS, Decision, SchedulerConfig, immediate_schedule, suggest
from .workload import Scenario, generate_cycles

SCHEDULER_KINDS = ("kubedsm", "bef", "sef", "cf", "k8s")

PENDING, STARTING, RUNNING, TERMINATING = "pending", "starting", "running", "terminating"


class SimulationDeadlock(RuntimeError):
    pass


@dataclass(frozen=True)
class LifecycleLatencies:
    pod_start_sec: float = 2.0
    pod_delete_sec: float = 1.0
    bind_ack_sec: float = 0.2

    def __post_init__(self):
        for name in ("pod_start_sec", "pod_delete_sec", "bind_ack_sec"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class SchedulerChoice:
    kind: str = "kubedsm"
    config: SchedulerConfig = SchedulerConfig()
    qos: QosConstants = DEFAULT_QOS
    label: str = ""

    def __post_init__(self):
        if self.kind not in SCHEDULER_KINDS:
            raise ValueError(f"unknown scheduler {self.kind!r}; expected one of {', '.join(SCHEDULER_KINDS)}")
        if not self.label:
            object.__setattr__(self, "label", self.kind)

    @classmethod
    def parse(cls, name: str, qos: QosConstants = DEFAULT_QOS, **cfg) -> "SchedulerChoice":
        """``kubedsm``, a baseline name, or ``kubedsm-<variant>`` (e.g. ``kubedsm-midmig``)."""
        kind, _, variant = name.lower().partition("-")
        if not variant:
            return cls(kind, SchedulerConfig(**cfg), qos, name.lower())
        names = {v.lower(): v for v in VARIANTS}
        if kind != "kubedsm" or variant not in names:
            raise ValueError(f"unknown scheduler {name!r}")
        return cls(kind, SchedulerConfig.variant(names[variant], **cfg), qos, name.lower())


@dataclass
class LivePod:
    pod_id: str
    service_id: str
    created_at: float
    node_id: Optional[str] = None
    phase: str = PENDING
    surge_of: Optional[str] = None
    bind_target: Optional[str] = None


@dataclass
class SimulationTrace:
    records: list[dict[str, Any]]
    summary: dict[str, Any] = field(default_factory=dict)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n" for r in self.records)

    @classmethod
    def from_jsonl(cls, text: str) -> "SimulationTrace":
        records = [json.loads(line) for line in text.splitlines() if line.strip()]
        summary = next((r["extra"] for r in records if r["event"] == "summary"), {})
        return cls(records, summary)

    @classmethod
    def read(cls, path: str | Path) -> "SimulationTrace":
        return cls.from_jsonl(Path(path).read_text())

    def events(self, name: str) -> list[dict[str, Any]]:
        return [r for r in self.records if r["event"] == name]


def _hpa_counted(pods: Mapping[str, LivePod]) -> dict[str, list[LivePod]]:
    """Pods the replica controller counts: not terminating and not a surge copy of a live pod."""
    out: dict[str, list[LivePod]] = {}
    for p in pods.values():
        if p.phase == TERMINATING:
            continue
        if p.surge_of is not None:
            orig = pods.get(p.surge_of)
            if orig is not None and orig.phase != TERMINATING:
                continue
        out.setdefault(p.service_id, []).append(p)
    return out


def hpa_reconcile(pods: Mapping[str, LivePod], targets: Mapping[str, int], now: float,
                  new_id: Callable[[str], str]) -> list[SimEvent]:
    """Creation and deletion requests bringing each service to its target.

    Deletions pick the newest pods first (ties broken by the larger pod id)
    and never touch surge replicas of a migration in flight.
    """
    counted = _hpa_counted(pods)
    out: list[SimEvent] = []
    for sid in sorted(targets):
        want = targets[sid]
        if want < 1:
            raise ValueError(f"replica target for {sid} must be at least 1")
        have = counted.get(sid, [])
        if len(have) < want:
            for _ in range(want - len(have)):
                out.append(SimEvent(now, 0, EventKind.POD_CREATED, new_id(sid), sid))
        elif len(have) > want:
            victims = sorted(have, key=lambda p: (p.created_at, p.pod_id), reverse=True)[:len(have) - want]
            out.extend(SimEvent(now, 0, EventKind.POD_DELETED, p.pod_id, sid) for p in victims)
    return out


class Simulation:
    def __init__(self, cluster: ClusterState, scenario: Scenario, choice: SchedulerChoice = SchedulerChoice(),
                 latencies: LifecycleLatencies = LifecycleLatencies(), hpa_period_sec: float = 15.0,
                 plan_timeout_sec: float = 30.0, targets: Optional[list[Mapping[str, int]]] = None,
                 inherit_age: bool = False):
        if hpa_period_sec <= 0 or plan_timeout_sec <= 0:
            raise ValueError("periods must be positive")
        self.cluster = ClusterState(cluster.nodes, cluster.services, {})
        self.scenario = scenario
        self.choice = choice
        self.lat = latencies
        self.hpa_period = hpa_period_sec
        self.inherit_age = inherit_age
        if targets is None:
            self.cycle_targets = [t for _, t in generate_cycles(scenario, cluster)]
        else:
            self.cycle_targets = [dict(t) for t in targets]
            if len(self.cycle_targets) != scenario.cycles:
                raise ValueError("need one target mapping per cycle")
        self.horizon = scenario.horizon
        self.cloud = cluster.cloud_id
        self.caps = {n.node_id: n.capacity for n in cluster.edge_nodes}
        self.res = {s: svc.pod_resources for s, svc in cluster.services.items()}

        self.world: dict[str, LivePod] = {}
        self.manager = PlacementManager(self.cloud, plan_timeout_sec)
        self.targets = {s: 1 for s in sorted(cluster.services)}
        self.records: list[dict[str, Any]] = []
        self.now = 0.0
        self._heap: list[SimEvent] = []
        self._seq = itertools.count()
        self._ids = itertools.count(1)
        self._id_service: dict[str, str] = {}
        self._flush_pending = False
        self.counters = {"capacity_violations": 0, "create_before_delete_violations": 0,
                         "suggest_limit_violations": 0, "suggest_runs": 0, "suggest_skipped": 0,
                         "plans": 0, "failed_binds": 0}

    # -- plumbing ----------------------------------------------------------
    def _push(self, time: float, kind: EventKind, pod=None, service=None, node=None, **extra) -> None:
        heapq.heappush(self._heap, SimEvent(time, next(self._seq), kind, pod, service, node, extra))

    def _rec(self, event: str, pod=None, service=None, node=None, **extra) -> None:
        self.records.append({"t": round(self.now, 6), "event": event, "pod": pod,
                             "service": service, "node": node, "extra": extra})

    def _new_id(self, service: str) -> str:
        pid = f"{service}-{next(self._ids):04d}"
        self._id_service[pid] = service
        return pid

    def _replica_id(self, pod_id: str) -> str:
        return self._new_id(self._id_service[pod_id])

    def _edge_used(self, node: str) -> ResourceVector:
        used = ResourceVector(0, 0)
        for p in self.world.values():
            if p.node_id == node:
                used = used + self.res[p.service_id]
        return used

    # -- scheduling views ----------------------------------------------------
    def _view(self) -> Optional[ClusterState]:
        """World as it will look once every active plan completes.

        Terminating pods are left out and so are originals whose deletion
        is still ahead in a plan.  Returns None if that picture overfills a
        node, which callers treat as "try again later".
        """
        assumed = self.manager.assumed_locations()
        leaving = set()
        for plan in self.manager.active():
            for step in plan.steps[plan.cursor:]:
                if step.action is ActionKind.DELETE:
                    leaving.add(step.pod_id)
        pods = {}
        for p in self.world.values():
            if p.phase == TERMINATING or p.pod_id in leaving:
                continue
            pods[p.pod_id] = PodRecord(p.pod_id, p.service_id, assumed.get(p.pod_id, p.node_id))
        for rid, sid, target in self.manager.pending_replicas():
            if rid not in pods and rid not in self.world:
                pods[rid] = PodRecord(rid, sid, target)
        view = ClusterState(self.cluster.nodes, self.cluster.services, pods)
        used = view.edge_used()
        if any(not used[n].fits_in(cap) for n, cap in self.caps.items()):
            return None
        return view

    def _decide(self, view: ClusterState, batch: list[str]) -> Decision:
        if self.choice.kind == "kubedsm":
            return immediate_schedule(view, batch, self.choice.config, self.choice.qos)
        return baseline_schedule(view, batch, BaselinePolicy(self.choice.kind))

    # -- actions -------------------------------------------------------------
    def _apply(self, directive: Directive) -> None:
        if directive.kind == "cancel":
            self._rec("PlanCancelled", plans=list(directive.plans), reason=directive.note)
        self._execute(directive.actions)

    def _execute(self, actions: Iterable[tuple[int, Step]]) -> None:
        for plan_id, step in actions:
            plan = self.manager.plans.get(plan_id)
            if plan is not None and plan.active and plan.current is step:
                self._push(self.now + self.manager.step_timeout, EventKind.PLAN_TIMEOUT,
                           plan_id=plan_id, step=plan.cursor)
            if step.action is ActionKind.AWAIT_CREATION:
                self._create(step.pod_id, step.service_id, surge_of=step.surge_of)
            elif step.action is ActionKind.BIND:
                pod = self.world.get(step.pod_id)
                if pod is not None and pod.phase == PENDING:
                    pod.bind_target = step.node_id
                    self._push(self.now + self.lat.bind_ack_sec, EventKind.BIND_ACK,
                               step.pod_id, pod.service_id, step.node_id)
            else:
                pod = self.world.get(step.pod_id)
                if pod is not None and pod.phase != TERMINATING:
                    self._note_migration(pod)
                    self._terminate(pod)

    def _note_migration(self, pod: LivePod) -> None:
        replica = next((p for p in self.world.values()
                        if p.surge_of == pod.pod_id and p.phase != TERMINATING), None)
        if replica is None:
            return
        if replica.phase != RUNNING:
            self.counters["create_before_delete_violations"] += 1
        self._rec("Migration", pod.pod_id, pod.service_id, replica.node_id, replica=replica.pod_id,
                  src=pod.node_id, dst=replica.node_id,
                  src_kind=self._kind(pod.node_id), dst_kind=self._kind(replica.node_id))

    def _kind(self, node: Optional[str]) -> Optional[str]:
        if node is None:
            return None
        return "cloud" if node == self.cloud else "edge"

    def _create(self, pod_id: str, service: str, surge_of: Optional[str] = None) -> None:
        born = self.now
        if surge_of is not None and surge_of in self.world and self.inherit_age:
            # a migration relocates a replica; it keeps the age of the pod it replaces
            born = self.world[surge_of].created_at
        self.world[pod_id] = LivePod(pod_id, service, born, surge_of=surge_of)
        self._id_service[pod_id] = service
        extra = {"surge_of": surge_of} if surge_of else {}
        self._rec("PodCreated", pod_id, service, None, **extra)
        self._push(self.now, EventKind.POD_CREATED, pod_id, service, **extra)

    def _terminate(self, pod: LivePod) -> None:
        pod.phase = TERMINATING
        self._rec("PodChanged", pod.pod_id, pod.service_id, pod.node_id, phase=TERMINATING)
        self._push(self.now + self.lat.pod_delete_sec, EventKind.POD_DELETED, pod.pod_id, pod.service_id)

    def _reconcile(self) -> None:
        for ev in hpa_reconcile(self.world, self.targets, self.now, self._new_id):
            if ev.kind is EventKind.POD_CREATED:
                self._create(ev.pod, ev.service)
            else:
                self._terminate(self.world[ev.pod])

    def _check_capacity(self, node: str) -> None:
        if node in self.caps and not self._edge_used(node).fits_in(self.caps[node]):
            self.counters["capacity_violations"] += 1

    # -- handlers ------------------------------------------------------------
    def _on_cycle(self, ev: SimEvent) -> None:
        i = ev.extra["cycle"]
        self.targets = dict(self.cycle_targets[i])
        self._rec("ScenarioCycleStart", cycle=i, targets=self.targets)
        self._reconcile()

    def _on_hpa(self, ev: SimEvent) -> None:
        self._reconcile()
        self._push(self.now + self.hpa_period, EventKind.HPA_RECONCILE)

    def _on_created(self, ev: SimEvent) -> None:
        d = self.manager.handle_event(ev)
        self._apply(d)
        if d.kind == "schedule" and not self._flush_pending:
            self._flush_pending = True
            self._push(self.now, EventKind.BATCH_FLUSH)

    def _on_flush(self, ev: SimEvent) -> None:
        self._flush_pending = False
        assumed = self.manager.assumed_locations()
        batch = [p for p in self.manager.take_batch()
                 if p in self.world and self.world[p].phase == PENDING and p not in assumed]
        if not batch:
            return
        view = self._view()
        if view is None:
            self.manager.pending_new.extend(batch)
            self._flush_pending = True
            self._push(self.now + self.lat.pod_delete_sec, EventKind.BATCH_FLUSH)
            return
        decision = self._decide(view, batch)
        self._rec("Schedule", batch=batch, to_edge=list(decision.to_edge), to_cloud=list(decision.to_cloud))
        self._submit(plans_from_decision(view, decision, self._replica_id))

    def _submit(self, plans: list[Plan]) -> None:
        self.counters["plans"] += len(plans)
        self._execute(self.manager.submit(plans, self.now))

    def _suggest_blocked(self) -> bool:
        return bool(self.manager.active() or self.manager.pending_new or self._flush_pending
                    or any(p.phase in (PENDING, TERMINATING) for p in self.world.values()))

    def _on_suggest(self, ev: SimEvent) -> None:
        self._push(self.now + self.choice.config.suggest_period_sec, EventKind.SUGGEST_TICK)
        if self._suggest_blocked():
            self.counters["suggest_skipped"] += 1
            return
        view = self._view()
        if view is None:
            self.counters["suggest_skipped"] += 1
            return
        self.counters["suggest_runs"] += 1
        decision = suggest(view, self.choice.config, self.choice.qos)
        if not decision.to_edge and not decision.migrations:
            return
        reorder = sum(1 for m in decision.migrations if m.dest != self.cloud)
        offload = len(decision.migrations) - reorder
        cfg = self.choice.config
        if len(decision.to_edge) > cfg.m_c2e or reorder > cfg.m_er:
            self.counters["suggest_limit_violations"] += 1
        plans = plans_from_decision(view, decision, self._replica_id)
        # pods that fit the pooled free room but no single node are dropped here
        self._rec("Suggest", c2e=len(decision.to_edge), reorder=reorder, offload=offload,
                  pods=list(decision.to_edge), moves=[list(m) for m in decision.migrations],
                  planned=bool(plans),
                  delta={sid: round(delta_from_counts(e, n, view.services[sid].qos_target), 9)
                         for sid, (e, n) in sorted(view.service_counts().items())})
        self._submit(plans)

    def _on_bind_ack(self, ev: SimEvent) -> None:
        pod = self.world.get(ev.pod)
        if pod is None or pod.phase != PENDING or pod.bind_target != ev.node:
            return
        pod.bind_target = None
        node = ev.node
        if node != self.cloud and not (self._edge_used(node) + self.res[pod.service_id]).fits_in(self.caps[node]):
            self.counters["failed_binds"] += 1
            self._rec("PodChanged", pod.pod_id, pod.service_id, node, phase="failed")
            self._push(self.now, EventKind.POD_CHANGED, pod.pod_id, pod.service_id, node, failed=True)
            return
        pod.node_id = node
        pod.phase = STARTING
        self._check_capacity(node)
        self._rec("PodChanged", pod.pod_id, pod.service_id, node, phase=STARTING)
        self._push(self.now, EventKind.POD_CHANGED, pod.pod_id, pod.service_id, node, phase=STARTING)
        self._push(self.now + self.lat.pod_start_sec, EventKind.POD_STARTED, pod.pod_id, pod.service_id, node)

    def _on_started(self, ev: SimEvent) -> None:
        pod = self.world.get(ev.pod)
        if pod is None or pod.phase != STARTING:
            return
        pod.phase = RUNNING
        self._rec("PodChanged", pod.pod_id, pod.service_id, pod.node_id, phase=RUNNING)
        self._push(self.now, EventKind.POD_CHANGED, pod.pod_id, pod.service_id, pod.node_id, phase=RUNNING)

    def _on_changed(self, ev: SimEvent) -> None:
        self._apply(self.manager.handle_event(ev))

    def _on_deleted(self, ev: SimEvent) -> None:
        pod = self.world.pop(ev.pod, None)
        if pod is None:
            return
        self._rec("PodDeleted", pod.pod_id, pod.service_id, pod.node_id)
        self._apply(self.manager.handle_event(ev))

    def _on_timeout(self, ev: SimEvent) -> None:
        self._apply(self.manager.on_timeout(ev.extra["plan_id"], ev.extra["step"], self.now))

    # -- driver --------------------------------------------------------------
    def _initial_state(self) -> None:
        """One pod per service, placed by the active scheduler before the clock starts."""
        pods = [self._new_id(s) for s in sorted(self.cluster.services)]
        state = ClusterState(self.cluster.nodes, self.cluster.services,
                             {p: PodRecord(p, self._id_service[p]) for p in pods})
        where = {p: self.cloud for p in pods}
        for plan in plans_from_decision(state, self._decide(state, pods), self._replica_id):
            for step in plan.steps:
                if step.action is ActionKind.BIND:
                    where[step.pod_id] = step.node_id
        for p in pods:
            self.world[p] = LivePod(p, self._id_service[p], 0.0, where[p], RUNNING)
        self._rec("init", nodes={n.node_id: n.kind.value for n in self.cluster.nodes},
                  services=sorted(self.cluster.services), scheduler=self.choice.label,
                  scenario=self.scenario.name, seed=self.scenario.seed,
                  pods={p: [self._id_service[p], where[p]] for p in pods})

    def run(self) -> SimulationTrace:
        handlers = {
            EventKind.CYCLE_START: self._on_cycle,
            EventKind.HPA_RECONCILE: self._on_hpa,
            EventKind.POD_CREATED: self._on_created,
            EventKind.BATCH_FLUSH: self._on_flush,
            EventKind.SUGGEST_TICK: self._on_suggest,
            EventKind.BIND_ACK: self._on_bind_ack,
            EventKind.POD_STARTED: self._on_started,
            EventKind.POD_CHANGED: self._on_changed,
            EventKind.POD_DELETED: self._on_deleted,
            EventKind.PLAN_TIMEOUT: self._on_timeout,
        }
        self._initial_state()
        for i in range(self.scenario.cycles):
            self._push(i * self.scenario.cycle_sec, EventKind.CYCLE_START, cycle=i)
        if self.horizon > 0:
            self._push(self.hpa_period, EventKind.HPA_RECONCILE)
            if self.choice.kind == "kubedsm":
                self._push(self.choice.config.suggest_period_sec, EventKind.SUGGEST_TICK)

        while self._heap and self._heap[0].time < self.horizon:
            ev = heapq.heappop(self._heap)
            self.now = ev.time
            handlers[ev.kind](ev)
        if not self._heap and self.now < self.horizon:
            self._deadlock_check()

        self.now = self.horizon
        self._rec("end", horizon=self.horizon)
        summary = dict(self.counters)
        summary["cancelled_plans"] = sum(1 for e in self.manager.log if e["result"].startswith("cancelled"))
        self._rec("summary", **summary)
        return SimulationTrace(self.records, summary)

    def _deadlock_check(self) -> None:
        counted = _hpa_counted(self.world)
        unmet = {s: (len(counted.get(s, [])), t) for s, t in self.targets.items()
                 if len(counted.get(s, [])) != t}
        if unmet:
            raise SimulationDeadlock(f"no pending events at t={self.now} with unmet replica targets "
                                     f"(have, want): {unmet}")


def run(cluster: ClusterState, scenario: Scenario, scheduler_choice: SchedulerChoice | str = "kubedsm",
        seed: Optional[int] = None, **kw) -> SimulationTrace:
    """Simulate ``scenario`` (reseeded with ``seed`` if given) under one scheduler."""
    if isinstance(scheduler_choice, str):
        scheduler_choice = SchedulerChoice.parse(scheduler_choice)
    if seed is not None:
        scenario = scenario.with_seed(seed)
    return Simulation(cluster, scenario, scheduler_choice, **kw).run()
