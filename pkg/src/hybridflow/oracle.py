"""Exhaustive (makespan, cost) Pareto frontier for small iterations.

The search space is every precedence-feasible placement order combined with
every machine choice (existing machine, or a new one of any catalog type).
Each placement goes to the earliest gap on the chosen machine, the same
rule the list scheduler uses, so any greedy schedule that fits inside the
machine limit is a member of the space.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .cloud import InstanceType, PricingPolicy
from .profile import RuntimeProfile
from .scheduler import (
    Assignment,
    PlannedMachine,
    Schedule,
    _earliest_on_machine,
    estimate_runtime,
    fastest_types,
    objectives,
    upward_ranks,
)
from .workflow import IterationDAG

DEFAULT_MAX_TASKS = 8
DEFAULT_MAX_MACHINES = 4


class OracleLimitExceeded(ValueError):
    pass


@dataclass(frozen=True)
class FrontierPoint:
    makespan: float
    cost: float
    witness: Schedule


@dataclass(frozen=True)
class Frontier:
    points: tuple[FrontierPoint, ...]
    explored: int

    @property
    def t_min(self) -> float:
        return min(p.makespan for p in self.points)

    @property
    def m_min(self) -> float:
        return min(p.cost for p in self.points)

    def dominates(self, makespan: float, cost: float, rel_tol: float = 1e-9) -> FrontierPoint | None:
        """A frontier point strictly better than (makespan, cost), if one exists."""
        for p in self.points:
            t_le = p.makespan <= makespan * (1 + rel_tol)
            m_le = p.cost <= cost + rel_tol * max(cost, 1.0)
            t_lt = p.makespan < makespan * (1 - rel_tol)
            m_lt = p.cost < cost - rel_tol * max(cost, 1.0)
            if t_le and m_le and (t_lt or m_lt):
                return p
        return None


def pareto_filter(points: Sequence[tuple[float, float]]) -> list[tuple[float, float]]:
    """Non-dominated subset, sorted by makespan."""
    front: list[tuple[float, float]] = []
    for t, m in sorted(set(points)):
        if not front or m < front[-1][1]:
            front.append((t, m))
    return front


def machine_limit(catalog: Sequence[InstanceType], max_machines: int) -> int:
    if any(t.capacity_limit is None for t in catalog):
        return max_machines
    return min(max_machines, sum(t.capacity_limit for t in catalog))


def brute_force_optimum(dag: IterationDAG, catalog: Sequence[InstanceType],
                        profile: RuntimeProfile, policy: PricingPolicy,
                        max_tasks: int = DEFAULT_MAX_TASKS,
                        max_machines: int = DEFAULT_MAX_MACHINES) -> Frontier:
    if len(dag) > max_tasks:
        raise OracleLimitExceeded(f"{len(dag)} task instances exceed the oracle limit of {max_tasks}")
    if not dag.instances:
        raise OracleLimitExceeded("empty iteration")
    limit = machine_limit(catalog, max_machines)
    types = sorted(catalog, key=lambda t: t.name)
    preds = {i: dag.predecessors(i) for i in dag.instances}
    runtimes = {(i, t.name): estimate_runtime(dag.spec(i), t, profile)
                for i in dag.instances for t in types}
    n = len(dag.instances)
    # remaining path length of each task at the fastest speed: a makespan lower bound
    tails = upward_ranks(dag, fastest_types(types)[0], profile)

    machines: list[PlannedMachine] = []
    lanes: dict[int, list[tuple[tuple[float, float], ...]]] = {}
    placed: dict = {}
    seen: set = set()
    best: dict[tuple[float, float], Schedule] = {}

    def state_key():
        per_machine = []
        for m in machines:
            tasks = tuple(sorted((a.instance, a.core, a.start)
                                 for a in placed.values() if a.machine_id == m.id))
            per_machine.append((m.type.name, tasks))
        return tuple(sorted(per_machine))

    def place(a: Assignment):
        lane = lanes[a.machine_id]
        lane[a.core] = tuple(sorted(lane[a.core] + ((a.start, a.end),)))
        placed[a.instance] = a

    def unplace(a: Assignment, lane_before):
        lanes[a.machine_id][a.core] = lane_before
        del placed[a.instance]

    def _bounded_out() -> bool:
        # spans only grow as tasks are added, so partial cost and makespan are lower bounds
        t_low = max(a.end for a in placed.values())
        for inst in dag.instances:
            if inst not in placed:
                ready = max((placed[p].end for p in preds[inst] if p in placed), default=0.0)
                t_low = max(t_low, ready + tails[inst])
        partial = Schedule(dag, tuple(placed.values()), tuple(machines))
        m_low = objectives(partial, policy).cost
        return any(t <= t_low and m <= m_low for t, m in best)

    def dfs():
        if len(placed) == n:
            schedule = Schedule(dag, tuple(placed.values()), tuple(machines))
            obj = objectives(schedule, policy)
            best.setdefault((obj.makespan, obj.cost), schedule)
            return
        key = state_key()
        if key in seen:
            return
        seen.add(key)
        if best and _bounded_out():
            return
        for inst in dag.instances:
            if inst in placed or any(p not in placed for p in preds[inst]):
                continue
            ready = max((placed[p].end for p in preds[inst]), default=0.0)
            for m in list(machines):
                runtime = runtimes[inst, m.type.name]
                start, core = _earliest_on_machine(lanes[m.id], ready, runtime)
                a = Assignment(inst, m.id, core, start, runtime)
                saved = lanes[m.id][core]
                place(a)
                dfs()
                unplace(a, saved)
            if len(machines) >= limit:
                continue
            for itype in types:
                in_use = sum(1 for m in machines if m.type.name == itype.name)
                if itype.capacity_limit is not None and in_use >= itype.capacity_limit:
                    continue
                m = PlannedMachine(len(machines), itype)
                machines.append(m)
                lanes[m.id] = [() for _ in range(itype.cores)]
                a = Assignment(inst, m.id, 0, ready, runtimes[inst, itype.name])
                place(a)
                dfs()
                del placed[inst]
                del lanes[m.id]
                machines.pop()

    dfs()
    front = pareto_filter(list(best))
    points = tuple(FrontierPoint(t, m, best[t, m]) for t, m in front)
    return Frontier(points, len(seen))
