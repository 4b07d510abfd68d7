"""Events flowing between the emulated API server and the placement manager."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional


class EventKind(str, Enum):
    POD_CREATED = "PodCreated"
    POD_CHANGED = "PodChanged"
    POD_DELETED = "PodDeleted"
    HPA_RECONCILE = "HpaReconcile"
    SUGGEST_TICK = "SuggestTick"
    CYCLE_START = "ScenarioCycleStart"
    # simulator-internal
    BIND_ACK = "BindAck"
    POD_STARTED = "PodStarted"
    BATCH_FLUSH = "BatchFlush"
    PLAN_TIMEOUT = "PlanTimeout"


@dataclass(order=True)
class SimEvent:
    time: float
    seq: int
    kind: EventKind = field(compare=False)
    pod: Optional[str] = field(default=None, compare=False)
    service: Optional[str] = field(default=None, compare=False)
    node: Optional[str] = field(default=None, compare=False)
    extra: dict[str, Any] = field(default_factory=dict, compare=False)
