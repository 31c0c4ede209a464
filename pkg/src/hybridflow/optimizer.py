"""The autonomic loop: profile each iteration, replan the next one, rescale the pool."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

from .cloud import InstanceType, PricingPolicy, ResourcePool, billed_cost
from .profile import RuntimeProfile
from .scheduler import (
    DEFAULT_MACHINE_CAP,
    Objectives,
    PlannedMachine,
    Schedule,
    greedy_min_makespan,
    plan_iteration,
    relabel,
    schedule_on_machines,
)
from .simulation import ExecutionTrace, Metrics, NoiseModel, PowerModel, account, execute
from .workflow import WorkflowGraph, iteration_instance

if TYPE_CHECKING:
    from .scenario import ScenarioConfig

__all__ = [
    "IterationReport",
    "ReplanThresholds",
    "RunResult",
    "RuntimeProfile",
    "ScaleDecision",
    "replan",
    "run_iterations",
    "update_profile",
]

MODES = ("greedy", "iterative")


@dataclass(frozen=True)
class ReplanThresholds:
    min_relative_gain: float = 0.05
    w_time: float = 1.0
    w_cost: float = 1.0

    def __post_init__(self):
        if not 0 < self.min_relative_gain < 1:
            raise ValueError("min_relative_gain must lie in (0, 1)")
        if self.w_time < 0 or self.w_cost < 0 or self.w_time + self.w_cost <= 0:
            raise ValueError("objective weights must be non-negative and not both zero")


def update_profile(profile: RuntimeProfile, trace: ExecutionTrace) -> RuntimeProfile:
    for run in trace.runs:
        profile = profile.observe(run.category, run.runtime, run.speed_factor)
    return profile


def projected_objectives(schedule: Schedule, policy: PricingPolicy) -> Objectives:
    """Makespan, and the bill for holding every machine of the schedule for that long.

    Idle machines count: keeping a leased machine costs money whether or
    not it runs anything.
    """
    makespan = schedule.makespan
    cost = sum(billed_cost(m.type, makespan, policy) for m in schedule.machines)
    return Objectives(makespan, cost)


def weighted_gain(incumbent: Objectives, candidate: Objectives,
                  thresholds: ReplanThresholds) -> float:
    """Relative drop in the weighted score when switching to ``candidate``.

    Each objective is divided by the larger of the two values, so both
    scores live in [0, w_time + w_cost].
    """
    t_ref = max(incumbent.makespan, candidate.makespan)
    m_ref = max(incumbent.cost, candidate.cost)

    def normalized(obj: Objectives) -> float:
        t = obj.makespan / t_ref if t_ref > 0 else 0.0
        m = obj.cost / m_ref if m_ref > 0 else 0.0
        return thresholds.w_time * t + thresholds.w_cost * m

    inc, cand = normalized(incumbent), normalized(candidate)
    return (inc - cand) / inc if inc > 0 else 0.0


@dataclass(frozen=True)
class ScaleDecision:
    adopted: bool
    gain: float
    incumbent: Objectives | None
    candidate: Objectives
    provision: tuple[str, ...] = ()
    release: tuple[int, ...] = ()


def _morph_plan(pool: ResourcePool, target: Sequence[PlannedMachine]):
    """Which leased machines to keep, which to release, which types to add."""
    available: dict[str, list[int]] = {}
    for m in sorted(pool.active.values(), key=lambda m: m.id):
        available.setdefault(m.type.name, []).append(m.id)
    keep: dict[int, int] = {}
    provision: list[tuple[int, str]] = []
    for m in sorted(target, key=lambda m: m.id):
        ids = available.get(m.type.name)
        if ids:
            keep[m.id] = ids.pop(0)
        else:
            provision.append((m.id, m.type.name))
    release = sorted(i for ids in available.values() for i in ids)
    return keep, provision, release


def replan(graph: WorkflowGraph, next_iteration: int, profile: RuntimeProfile,
           pool: ResourcePool, catalog: Sequence[InstanceType], policy: PricingPolicy,
           thresholds: ReplanThresholds,
           max_machines: int = DEFAULT_MACHINE_CAP) -> tuple[Schedule, ScaleDecision]:
    """Plan ``next_iteration`` and decide whether to rescale the pool for it.

    The candidate is the full greedy/consolidate/downgrade plan under the
    current profile. The incumbent re-runs the machines already leased with
    the same estimates, so any gain comes from the change of resources rather
    than from better estimates. The candidate is adopted only when its
    weighted gain reaches ``thresholds.min_relative_gain``.

    The returned schedule uses pool machine ids when the incumbent is kept and
    planned ids when the candidate is adopted; :func:`apply_scale` binds the
    latter to freshly leased machines.
    """
    dag = iteration_instance(graph, next_iteration)
    candidate = plan_iteration(dag, catalog, profile, policy, max_machines)
    cand_obj = projected_objectives(candidate, policy)
    leased = [PlannedMachine(m.id, m.type) for m in sorted(pool.active.values(), key=lambda m: m.id)]
    if not leased:
        _, provision, _ = _morph_plan(pool, candidate.machines)
        return candidate, ScaleDecision(True, 1.0, None, cand_obj,
                                        tuple(name for _, name in provision), ())
    incumbent = schedule_on_machines(dag, leased, catalog, profile)
    inc_obj = projected_objectives(incumbent, policy)
    gain = weighted_gain(inc_obj, cand_obj, thresholds)
    if gain < thresholds.min_relative_gain:
        return incumbent, ScaleDecision(False, gain, inc_obj, cand_obj)
    _, provision, release = _morph_plan(pool, candidate.machines)
    return candidate, ScaleDecision(True, gain, inc_obj, cand_obj,
                                    tuple(name for _, name in provision), tuple(release))


def apply_scale(pool: ResourcePool, schedule: Schedule, now: float) -> Schedule:
    """Reshape ``pool`` to the machines of ``schedule`` and bind the schedule to them."""
    keep, provision, release = _morph_plan(pool, schedule.machines)
    for machine_id in release:
        pool.release(machine_id, now)
    mapping = dict(keep)
    for planned_id, type_name in provision:
        mapping[planned_id] = pool.provision(type_name, now).id
    return relabel(schedule, mapping)


@dataclass(frozen=True)
class IterationReport:
    iteration: int
    mode: str
    machines_active: dict[str, int]
    makespan_est: float
    makespan_actual: float
    cost_to_date: float
    energy_to_date: float
    replanned: bool
    projected_gain: float | None = None

    @property
    def machines_total(self) -> int:
        return sum(self.machines_active.values())


@dataclass
class RunResult:
    mode: str
    reports: list[IterationReport]
    schedules: list[Schedule]
    traces: list[ExecutionTrace]
    metrics: Metrics
    pool: ResourcePool = field(repr=False)
    profile: RuntimeProfile = field(default_factory=RuntimeProfile)


def _energy(pool: ResourcePool, busy: float, now: float, power: PowerModel) -> float:
    energy = busy * power.busy_power
    if power.idle_power:
        leased = 0.0
        for m in pool.machines():
            end = m.lease_end if m.lease_end is not None else now
            leased += (end - m.lease_start) * m.type.cores
        energy += max(leased - busy, 0.0) * power.idle_power
    return energy


def run_iterations(scenario: ScenarioConfig, mode: str = "iterative") -> RunResult:
    """Run every iteration of the scenario's workflow in ``mode``.

    Both modes start from the same Step-0 pool: the greedy makespan plan on
    nominal estimates, leased at time 0. ``greedy`` keeps replaying that plan.
    ``iterative`` profiles each executed iteration and replans the next one,
    rescaling the pool at the iteration boundary when the gain is large enough.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    graph = scenario.workflow
    catalog = list(scenario.catalog)
    policy = scenario.policy
    noise: NoiseModel = scenario.noise
    pool = ResourcePool(catalog)
    profile = RuntimeProfile()
    nominal = RuntimeProfile()
    now = 0.0
    busy = 0.0
    reports, schedules, traces = [], [], []

    for k in range(graph.max_iterations):
        dag = iteration_instance(graph, k)
        replanned, gain = False, None
        if k == 0 or mode == "greedy":
            plan = greedy_min_makespan(dag, catalog, nominal, policy, scenario.max_machines)
            schedule = apply_scale(pool, plan, now)
        else:
            plan, decision = replan(graph, k, profile, pool, catalog, policy,
                                    scenario.thresholds, scenario.max_machines)
            schedule = apply_scale(pool, plan, now) if decision.adopted else plan
            replanned, gain = decision.adopted, decision.gain
        counts = pool.counts()
        trace = execute(schedule, noise, offset=now)
        if mode == "iterative":
            profile = update_profile(profile, trace)
        now += max((r.end for r in trace.runs), default=0.0)
        busy += trace.busy_core_seconds
        reports.append(IterationReport(
            iteration=k,
            mode=mode,
            machines_active=counts,
            makespan_est=schedule.makespan,
            makespan_actual=trace.makespan,
            cost_to_date=pool.cost(policy, now=now),
            energy_to_date=_energy(pool, busy, now, scenario.power),
            replanned=replanned,
            projected_gain=gain,
        ))
        schedules.append(schedule)
        traces.append(trace)

    pool.release_all(now)
    metrics = account(traces, pool, policy, scenario.power)
    return RunResult(mode, reports, schedules, traces, metrics, pool, profile)
