"""Schedule construction: greedy makespan, consolidation and public downgrading.

Schedules are planned relative to the start of their iteration (time 0).
Every task occupies one core of its machine for its estimated runtime.
"""

from __future__ import annotations

import heapq
import math
from collections import defaultdict
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

from .cloud import InstanceType, PricingPolicy, billed_cost
from .profile import REFERENCE_SPEED, RuntimeProfile
from .workflow import IterationDAG, TaskInstance, TaskSpec

DEFAULT_MACHINE_CAP = 64


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class Assignment:
    instance: TaskInstance
    machine_id: int
    core: int
    start: float
    runtime: float

    @property
    def end(self) -> float:
        return self.start + self.runtime


@dataclass(frozen=True)
class PlannedMachine:
    id: int
    type: InstanceType


@dataclass(frozen=True)
class Objectives:
    makespan: float
    cost: float


@dataclass(frozen=True)
class Schedule:
    dag: IterationDAG
    assignments: tuple[Assignment, ...]
    machines: tuple[PlannedMachine, ...]

    def __post_init__(self):
        object.__setattr__(self, "assignments", tuple(sorted(
            self.assignments, key=lambda a: (a.start, a.machine_id, a.core, a.instance))))
        object.__setattr__(self, "machines", tuple(sorted(self.machines, key=lambda m: m.id)))

    def machine(self, machine_id: int) -> PlannedMachine:
        for m in self.machines:
            if m.id == machine_id:
                return m
        raise KeyError(machine_id)

    def by_instance(self) -> dict[TaskInstance, Assignment]:
        return {a.instance: a for a in self.assignments}

    def on_machine(self, machine_id: int) -> list[Assignment]:
        return [a for a in self.assignments if a.machine_id == machine_id]

    def used_machines(self) -> list[PlannedMachine]:
        used = {a.machine_id for a in self.assignments}
        return [m for m in self.machines if m.id in used]

    @property
    def makespan(self) -> float:
        if not self.assignments:
            return 0.0
        return max(a.end for a in self.assignments) - min(a.start for a in self.assignments)

    def type_counts(self, used_only: bool = True) -> dict[str, int]:
        counts: dict[str, int] = defaultdict(int)
        for m in (self.used_machines() if used_only else self.machines):
            counts[m.type.name] += 1
        return dict(sorted(counts.items()))

    def validate(self) -> None:
        """Raise :class:`ScheduleError` unless coverage, precedence and capacity hold."""
        placed = self.by_instance()
        if len(placed) != len(self.assignments):
            raise ScheduleError("task instance assigned more than once")
        expected = set(self.dag.instances)
        if set(placed) != expected:
            missing = sorted(expected - set(placed))
            extra = sorted(set(placed) - expected)
            raise ScheduleError(f"coverage mismatch: missing={missing} extra={extra}")
        machines = {m.id: m for m in self.machines}
        for a in self.assignments:
            m = machines.get(a.machine_id)
            if m is None:
                raise ScheduleError(f"{a.instance}: unknown machine {a.machine_id}")
            if not 0 <= a.core < m.type.cores:
                raise ScheduleError(f"{a.instance}: core {a.core} outside machine {m.id}")
            if not a.runtime > 0:
                raise ScheduleError(f"{a.instance}: non-positive runtime")
        for u, v in self.dag.edges:
            if placed[u].end > placed[v].start:
                raise ScheduleError(f"precedence violated: {u} -> {v}")
        lanes: dict[tuple[int, int], list[Assignment]] = defaultdict(list)
        for a in self.assignments:
            lanes[a.machine_id, a.core].append(a)
        for (mid, core), lane in lanes.items():
            lane.sort(key=lambda a: a.start)
            for prev, nxt in zip(lane, lane[1:]):
                if prev.end > nxt.start:
                    raise ScheduleError(
                        f"capacity violated on machine {mid} core {core}: "
                        f"{prev.instance} overlaps {nxt.instance}")


def estimate_runtime(task: TaskSpec, itype: InstanceType, profile: RuntimeProfile) -> float:
    estimate = profile.estimate(task.category)
    if estimate is None:
        return task.nominal_work / itype.speed_factor
    return estimate * REFERENCE_SPEED / itype.speed_factor


def objectives(schedule: Schedule, policy: PricingPolicy) -> Objectives:
    """Makespan and cost; each machine is leased from its first start to its last end."""
    cost = 0.0
    for m in schedule.used_machines():
        mine = schedule.on_machine(m.id)
        span = max(a.end for a in mine) - min(a.start for a in mine)
        cost += billed_cost(m.type, span, policy)
    return Objectives(schedule.makespan, cost)


def machine_quanta(schedule: Schedule, policy: PricingPolicy) -> dict[int, int]:
    quanta = {}
    for m in schedule.used_machines():
        mine = schedule.on_machine(m.id)
        quanta[m.id] = policy.quanta(max(a.end for a in mine) - min(a.start for a in mine))
    return quanta


# -- slot search -------------------------------------------------------------

def _earliest_on_core(lane: Sequence[tuple[float, float]], ready: float, runtime: float,
                      deadline: float = math.inf) -> float | None:
    """Earliest start >= ready of a gap that fits ``runtime`` in a sorted lane."""
    t = ready
    for start, end in lane:
        if t + runtime <= start:
            break
        if end > t:
            t = end
    return t if t + runtime <= deadline else None


def _earliest_on_machine(lanes: Sequence[Sequence[tuple[float, float]]], ready: float,
                         runtime: float, deadline: float = math.inf) -> tuple[float, int] | None:
    best = None
    for core, lane in enumerate(lanes):
        t = _earliest_on_core(lane, ready, runtime, deadline)
        if t is not None and (best is None or t < best[0]):
            best = (t, core)
    return best


class _Timeline:
    """Busy intervals per (machine, core), kept sorted by start."""

    def __init__(self):
        self.lanes: dict[int, list[list[tuple[float, float]]]] = {}

    def add_machine(self, machine: PlannedMachine) -> None:
        self.lanes[machine.id] = [[] for _ in range(machine.type.cores)]

    def book(self, a: Assignment) -> None:
        lane = self.lanes[a.machine_id][a.core]
        lane.append((a.start, a.end))
        lane.sort()

    def earliest(self, machine_id: int, ready: float, runtime: float,
                 deadline: float = math.inf) -> tuple[float, int] | None:
        return _earliest_on_machine(self.lanes[machine_id], ready, runtime, deadline)


# -- step 1: greedy makespan -------------------------------------------------

def fastest_types(catalog: Iterable[InstanceType]) -> list[InstanceType]:
    """Catalog ordered fastest first; ties go to the cheaper, then by name."""
    return sorted(catalog, key=lambda t: (-t.speed_factor, t.price_per_quantum, t.name))


def upward_ranks(dag: IterationDAG, itype: InstanceType,
                 profile: RuntimeProfile) -> dict[TaskInstance, float]:
    """Longest estimated path from each task to an exit task, on ``itype``."""
    ranks: dict[TaskInstance, float] = {}
    for inst in reversed(dag.instances):  # instances are stored in topological order
        tail = max((ranks[s] for s in dag.successors(inst)), default=0.0)
        ranks[inst] = estimate_runtime(dag.spec(inst), itype, profile) + tail
    return ranks


def priority_order(dag: IterationDAG, ranks: dict[TaskInstance, float]) -> list[TaskInstance]:
    """Descending rank, constrained to stay topological even under float ties."""
    indegree = {inst: 0 for inst in dag.instances}
    for _, v in dag.edges:
        indegree[v] += 1
    ready = [(-ranks[i], i) for i, d in indegree.items() if d == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        _, inst = heapq.heappop(ready)
        order.append(inst)
        for child in dag.successors(inst):
            indegree[child] -= 1
            if indegree[child] == 0:
                heapq.heappush(ready, (-ranks[child], child))
    return order


def _list_schedule(dag: IterationDAG, catalog: Sequence[InstanceType], profile: RuntimeProfile,
                   machines: Sequence[PlannedMachine], provision: bool,
                   max_machines: int) -> Schedule:
    if not dag.instances:
        raise ScheduleError("cannot schedule an empty iteration")
    by_speed = fastest_types(catalog)
    if not by_speed:
        raise ScheduleError("empty catalog")
    ranks = upward_ranks(dag, by_speed[0], profile)

    pool = list(machines)
    timeline = _Timeline()
    for m in pool:
        timeline.add_machine(m)
    placed: dict[TaskInstance, Assignment] = {}
    next_id = max((m.id for m in pool), default=-1) + 1

    def provisionable() -> InstanceType | None:
        if len(pool) >= max_machines:
            return None
        for itype in by_speed:
            count = sum(1 for m in pool if m.type.name == itype.name)
            if itype.capacity_limit is None or count < itype.capacity_limit:
                return itype
        return None

    for inst in priority_order(dag, ranks):
        spec = dag.spec(inst)
        ready = max((placed[p].end for p in dag.predecessors(inst)), default=0.0)
        best = None
        for m in pool:
            runtime = estimate_runtime(spec, m.type, profile)
            start, core = timeline.earliest(m.id, ready, runtime)
            key = (start + runtime, m.id)
            if best is None or key < best[0]:
                best = (key, Assignment(inst, m.id, core, start, runtime))
        fresh = provisionable() if provision else None
        if fresh is not None:
            runtime = estimate_runtime(spec, fresh, profile)
            if best is None or ready + runtime < best[0][0]:
                machine = PlannedMachine(next_id, fresh)
                next_id += 1
                pool.append(machine)
                timeline.add_machine(machine)
                best = ((ready + runtime, machine.id), Assignment(inst, machine.id, 0, ready, runtime))
        if best is None:
            raise ScheduleError(f"no machine available for {inst}")
        assignment = best[1]
        timeline.book(assignment)
        placed[inst] = assignment
    return Schedule(dag, tuple(placed.values()), tuple(pool))


def greedy_min_makespan(dag: IterationDAG, catalog: Sequence[InstanceType],
                        profile: RuntimeProfile, policy: PricingPolicy | None = None,
                        max_machines: int = DEFAULT_MACHINE_CAP) -> Schedule:
    """Upward-rank list scheduling that provisions the fastest type whenever it finishes sooner.

    Cost is ignored (``policy`` is accepted for signature symmetry only).
    Provisioning falls back to the next fastest type once a type's capacity
    limit is reached; ``max_machines`` bounds pools with unlimited types.
    """
    return _list_schedule(dag, catalog, profile, (), True, max_machines)


def schedule_on_machines(dag: IterationDAG, machines: Sequence[PlannedMachine],
                         catalog: Sequence[InstanceType], profile: RuntimeProfile) -> Schedule:
    """Same list scheduler, restricted to a fixed set of machines."""
    if not machines:
        raise ScheduleError("no machines to schedule on")
    return _list_schedule(dag, catalog, profile, machines, False, len(machines))


# -- step 2: consolidation ---------------------------------------------------

def _rehome(schedule: Schedule, victim: PlannedMachine) -> Schedule | None:
    keep = [a for a in schedule.assignments if a.machine_id != victim.id]
    moving = [a for a in schedule.assignments if a.machine_id == victim.id]
    # runtimes only carry over unchanged between machines of equal speed
    targets = [m for m in schedule.used_machines()
               if m.id != victim.id and m.type.speed_factor == victim.type.speed_factor]
    if not targets:
        return None
    timeline = _Timeline()
    for m in targets:
        timeline.add_machine(m)
    for a in keep:
        if a.machine_id in timeline.lanes:
            timeline.book(a)

    placed = schedule.by_instance()
    first = min(a.start for a in schedule.assignments)
    last = max(a.end for a in schedule.assignments)
    dag = schedule.dag
    for a in moving:
        lo = max([placed[p].end for p in dag.predecessors(a.instance)] + [first])
        hi = min([placed[s].start for s in dag.successors(a.instance)] + [last])
        best = None
        for m in targets:
            slot = timeline.earliest(m.id, lo, a.runtime, hi)
            if slot is not None and (best is None or (slot[0], m.id, slot[1]) < best):
                best = (slot[0], m.id, slot[1])
        if best is None:
            return None
        moved = replace(a, machine_id=best[1], core=best[2], start=best[0])
        timeline.book(moved)
        placed[a.instance] = moved
    machines = tuple(m for m in schedule.machines if m.id != victim.id)
    return Schedule(dag, tuple(placed.values()), machines)


def consolidate(schedule: Schedule, policy: PricingPolicy) -> Schedule:
    """Empty lightly loaded machines into idle cores elsewhere without moving the makespan.

    Victims are tried least-loaded first; each victim's tasks go to the
    earliest slot on another machine of the same speed that respects
    precedence and finishes inside the current schedule window. A victim is
    released only if all its tasks move, the makespan is unchanged and cost
    does not rise.
    """
    current = schedule
    while True:
        makespan = current.makespan
        cost = objectives(current, policy).cost
        loads = []
        for m in current.used_machines():
            loads.append((sum(a.runtime for a in current.on_machine(m.id)), m.id, m))
        for _, _, victim in sorted(loads, key=lambda x: (x[0], x[1])):
            trial = _rehome(current, victim)
            if (trial is not None and trial.makespan == makespan
                    and objectives(trial, policy).cost <= cost):
                current = trial
                break
        else:
            return current


# -- step 3: downgrading -----------------------------------------------------

def _next_cheaper(itype: InstanceType, catalog: Sequence[InstanceType]) -> InstanceType | None:
    cheaper = [t for t in catalog
               if t.is_public and t.price_per_quantum < itype.price_per_quantum]
    if not cheaper:
        return None
    return max(cheaper, key=lambda t: (t.price_per_quantum, t.speed_factor, t.name))


def _retime(schedule: Schedule, machine_id: int, new_type: InstanceType) -> Schedule:
    """Swap one machine's type and push later work right as needed.

    Each task keeps its machine, its position in the start order and (on
    untouched machines) its core; no task starts earlier than before.
    """
    old_type = schedule.machine(machine_id).type
    scale = old_type.speed_factor / new_type.speed_factor
    free: dict[tuple[int, int], float] = defaultdict(lambda: -math.inf)
    done: dict[TaskInstance, Assignment] = {}
    dag = schedule.dag
    for a in schedule.assignments:
        ready = max((done[p].end for p in dag.predecessors(a.instance)), default=-math.inf)
        if a.machine_id == machine_id:
            runtime = a.runtime * scale
            core = min(range(new_type.cores), key=lambda c: (free[machine_id, c], c))
        else:
            runtime, core = a.runtime, a.core
        start = max(a.start, ready, free[a.machine_id, core])
        moved = Assignment(a.instance, a.machine_id, core, start, runtime)
        free[a.machine_id, core] = moved.end
        done[a.instance] = moved
    machines = tuple(PlannedMachine(m.id, new_type) if m.id == machine_id else m
                     for m in schedule.machines)
    return Schedule(dag, tuple(done.values()), machines)


def downgrade_instances(schedule: Schedule, catalog: Sequence[InstanceType],
                        policy: PricingPolicy) -> Schedule:
    """Move public machines to cheaper public types while the work stays in the same billed slot.

    A downgrade is kept only if no machine's billed quanta grow and the
    makespan stays within the input makespan rounded up to a quantum.
    """
    bound = policy.slot_end(schedule.makespan)
    current = schedule
    public = [m for m in schedule.used_machines() if m.type.is_public]
    for m in sorted(public, key=lambda m: (-m.type.price_per_quantum, m.id)):
        while True:
            itype = current.machine(m.id).type
            target = _next_cheaper(itype, catalog)
            if target is None:
                break
            in_use = sum(1 for x in current.machines if x.type.name == target.name)
            if target.capacity_limit is not None and in_use >= target.capacity_limit:
                break
            trial = _retime(current, m.id, target)
            before = machine_quanta(current, policy)
            after = machine_quanta(trial, policy)
            if trial.makespan > bound or any(after[k] > before[k] for k in after):
                break
            current = trial
    return current


def plan_iteration(dag: IterationDAG, catalog: Sequence[InstanceType], profile: RuntimeProfile,
                   policy: PricingPolicy, max_machines: int = DEFAULT_MACHINE_CAP) -> Schedule:
    """Steps 1-3 in sequence: greedy, consolidate, downgrade."""
    greedy = greedy_min_makespan(dag, catalog, profile, policy, max_machines)
    return downgrade_instances(consolidate(greedy, policy), catalog, policy)


def critical_path_bound(dag: IterationDAG, catalog: Sequence[InstanceType],
                        profile: RuntimeProfile) -> float:
    """Longest path at the fastest catalog speed: no schedule can beat it."""
    ranks = upward_ranks(dag, fastest_types(catalog)[0], profile)
    return max(ranks.values(), default=0.0)


def relabel(schedule: Schedule, mapping: dict[int, int]) -> Schedule:
    """Rename machine ids (e.g. planned ids onto leased pool ids)."""
    assignments = tuple(replace(a, machine_id=mapping[a.machine_id]) for a in schedule.assignments)
    machines = tuple(PlannedMachine(mapping[m.id], m.type) for m in schedule.machines)
    return Schedule(schedule.dag, assignments, machines)
