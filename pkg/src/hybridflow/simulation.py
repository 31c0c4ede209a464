"""Discrete-event execution of schedules with seeded runtime noise.

Each machine core works through its assigned tasks in planned order. A task
is dispatched at its planned start, or later if a predecessor or the task
ahead of it on the same core has not finished yet. Overruns therefore push
successors back instead of failing the run.
"""

from __future__ import annotations

import enum
import heapq
import random
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable

from .cloud import LeaseError, PricingPolicy, ResourcePool
from .scheduler import Assignment, Schedule
from .workflow import TaskInstance


class NoiseKind(str, enum.Enum):
    NONE = "none"
    UNIFORM_FACTOR = "uniform_factor"


@dataclass(frozen=True)
class NoiseModel:
    """Where actual runtimes come from.

    ``none`` replays the planned runtimes exactly. ``uniform_factor`` draws a
    factor in ``[low, high]`` per (task, iteration) and applies it to the true
    runtime, ``nominal_work / speed_factor * bias``; ``bias`` says how far the
    nominal work figures are from reality.
    """

    kind: NoiseKind = NoiseKind.NONE
    low: float = 0.8
    high: float = 1.2
    seed: int | None = None
    bias: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", NoiseKind(self.kind))
        if not (0 < self.low <= self.high):
            raise ValueError("noise bounds must satisfy 0 < low <= high")
        if not self.bias > 0:
            raise ValueError("bias must be positive")
        if self.kind is not NoiseKind.NONE and self.seed is None:
            raise ValueError("a seed is required when noise is enabled")

    def factor(self, instance: TaskInstance) -> float:
        if self.kind is NoiseKind.NONE:
            return 1.0
        # one stream per (task, iteration): draws do not depend on event order
        rng = random.Random(f"{self.seed}:{instance.task_id}:{instance.iteration}")
        return rng.uniform(self.low, self.high)

    def actual_runtime(self, schedule: Schedule, a: Assignment) -> float:
        if self.kind is NoiseKind.NONE:
            return a.runtime
        spec = schedule.dag.spec(a.instance)
        speed = schedule.machine(a.machine_id).type.speed_factor
        return spec.nominal_work / speed * self.bias * self.factor(a.instance)


@dataclass(frozen=True)
class TaskRun:
    instance: TaskInstance
    category: str
    machine_id: int
    type_name: str
    speed_factor: float
    core: int
    start: float
    runtime: float

    @property
    def end(self) -> float:
        return self.start + self.runtime


@dataclass(frozen=True)
class ExecutionTrace:
    """Runs of one iteration. Times are relative to ``offset``, the iteration's start."""

    runs: tuple[TaskRun, ...]
    busy: dict[int, float] = field(default_factory=dict)
    offset: float = 0.0

    @property
    def makespan(self) -> float:
        if not self.runs:
            return 0.0
        return max(r.end for r in self.runs) - min(r.start for r in self.runs)

    @property
    def busy_core_seconds(self) -> float:
        return sum(self.busy.values())


def execute(schedule: Schedule, noise: NoiseModel, offset: float = 0.0) -> ExecutionTrace:
    dag = schedule.dag
    lanes: dict[tuple[int, int], list[Assignment]] = defaultdict(list)
    for a in schedule.assignments:  # already in planned start order
        lanes[a.machine_id, a.core].append(a)
    head = dict.fromkeys(lanes, 0)
    lane_busy = dict.fromkeys(lanes, False)
    waiting = {a.instance: len(dag.predecessors(a.instance)) for a in schedule.assignments}
    released: set[TaskInstance] = set()
    runs: dict[TaskInstance, TaskRun] = {}
    by_instance = schedule.by_instance()

    events: list[tuple[float, int, int, TaskInstance]] = []
    seq = 0
    COMPLETE, RELEASE = 0, 1  # completions first at equal times

    def push(time, kind, inst):
        nonlocal seq
        heapq.heappush(events, (time, kind, seq, inst))
        seq += 1

    def try_start(inst: TaskInstance, now: float):
        a = by_instance[inst]
        lane = (a.machine_id, a.core)
        if (inst in runs or inst not in released or waiting[inst] or lane_busy[lane]
                or lanes[lane][head[lane]].instance != inst):
            return
        machine = schedule.machine(a.machine_id)
        run = TaskRun(inst, dag.spec(inst).category, a.machine_id, machine.type.name,
                      machine.type.speed_factor, a.core, now, noise.actual_runtime(schedule, a))
        runs[inst] = run
        lane_busy[lane] = True
        push(run.end, COMPLETE, inst)

    for a in schedule.assignments:
        push(a.start, RELEASE, a.instance)

    while events:
        now, kind, _, inst = heapq.heappop(events)
        if kind == RELEASE:
            released.add(inst)
            try_start(inst, now)
            continue
        a = by_instance[inst]
        lane = (a.machine_id, a.core)
        lane_busy[lane] = False
        head[lane] += 1
        if head[lane] < len(lanes[lane]):
            try_start(lanes[lane][head[lane]].instance, now)
        for child in dag.successors(inst):
            waiting[child] -= 1
            try_start(child, now)

    if len(runs) != len(schedule.assignments):
        raise RuntimeError("execution stalled before every task ran")
    busy: dict[int, float] = defaultdict(float)
    ordered = sorted(runs.values(), key=lambda r: (r.start, r.machine_id, r.core, r.instance))
    for r in ordered:
        busy[r.machine_id] += r.runtime
    return ExecutionTrace(tuple(ordered), dict(sorted(busy.items())), offset)


@dataclass(frozen=True)
class PowerModel:
    """Energy proxy weights, in energy units per core-second."""

    busy_power: float = 1.0
    idle_power: float = 0.0


@dataclass(frozen=True)
class Metrics:
    makespan_actual: float
    cost: float
    energy_proxy: float
    machine_hours: dict[str, float] = field(default_factory=dict)


def account(traces: ExecutionTrace | Iterable[ExecutionTrace], pool: ResourcePool,
            policy: PricingPolicy, power: PowerModel = PowerModel()) -> Metrics:
    """Totals over one or more traces executed on ``pool``.

    Makespan spans the first start to the last end in absolute time. Idle
    energy, when enabled, charges every leased core-second not spent on a task.
    """
    if isinstance(traces, ExecutionTrace):
        traces = [traces]
    traces = list(traces)
    referenced = {r.machine_id for t in traces for r in t.runs}
    open_ids = sorted(referenced & set(pool.active))
    if open_ids:
        raise LeaseError(f"machines {open_ids} still have open leases")
    runs = [(t.offset + r.start, t.offset + r.end) for t in traces for r in t.runs]
    makespan = max(e for _, e in runs) - min(s for s, _ in runs) if runs else 0.0
    busy = sum(t.busy_core_seconds for t in traces)
    energy = busy * power.busy_power
    hours: dict[str, float] = defaultdict(float)
    leased_core_seconds = 0.0
    for m in pool.released:
        hours[m.type.name] += m.duration / 3600.0
        leased_core_seconds += m.duration * m.type.cores
    if power.idle_power:
        energy += max(leased_core_seconds - busy, 0.0) * power.idle_power
    cost = pool.cost(policy)
    return Metrics(makespan, cost, energy, dict(sorted(hours.items())))
