from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridflow.cloud import InstanceType, PricingPolicy, Venue, default_catalog
from hybridflow.generators import random_catalog, random_workflow
from hybridflow.profile import RuntimeProfile
from hybridflow.reports import dumps_schedules
from hybridflow.scheduler import (
    Assignment,
    Objectives,
    PlannedMachine,
    Schedule,
    ScheduleError,
    consolidate,
    critical_path_bound,
    downgrade_instances,
    estimate_runtime,
    greedy_min_makespan,
    objectives,
    plan_iteration,
    schedule_on_machines,
)
from hybridflow.workflow import TaskInstance, TaskSpec, iteration_instance

from .conftest import FAST, PRIVATE, SLOW, make_dag


def half_nominal_profile(graph) -> RuntimeProfile:
    return RuntimeProfile({t.category: (t.nominal_work / 2,) for t in graph.tasks})


def hand_schedule(dag, placements, machines):
    """placements: task id -> (machine id, core, start, runtime)."""
    by_id = {i.task_id: i for i in dag.instances}
    assignments = tuple(Assignment(by_id[t], m, c, s, r) for t, (m, c, s, r) in placements.items())
    return Schedule(dag, assignments, tuple(machines))


class TestEstimateRuntime:
    def test_nominal(self):
        assert estimate_runtime(TaskSpec("A", "x", 100), FAST, RuntimeProfile()) == 50.0

    def test_profile_scaled_to_target_speed(self):
        profile = RuntimeProfile({"x": (80.0,)})
        assert estimate_runtime(TaskSpec("A", "x", 100), FAST, profile) == 40.0

    def test_single_observation(self):
        profile = RuntimeProfile().observe("x", 60.0, 1.0)
        assert estimate_runtime(TaskSpec("A", "x", 100), SLOW, profile) == 60.0


class TestObjectives:
    def test_empty(self):
        dag = make_dag({"A": 1})
        assert objectives(Schedule(dag, (), ()), PricingPolicy()) == Objectives(0.0, 0.0)

    def test_single_public_task(self):
        dag = make_dag({"A": 1})
        s = hand_schedule(dag, {"A": (0, 0, 0.0, 50.0)}, [PlannedMachine(0, FAST)])
        assert objectives(s, PricingPolicy(3600, 1)) == Objectives(50.0, 10.0)

    def test_single_private_task(self):
        dag = make_dag({"A": 1})
        s = hand_schedule(dag, {"A": (0, 0, 0.0, 70.0)}, [PlannedMachine(0, PRIVATE)])
        assert objectives(s, PricingPolicy()) == Objectives(70.0, 0.0)

    def test_lease_spans_first_to_last_task(self):
        dag = make_dag({"A": 1, "B": 1})
        s = hand_schedule(dag, {"A": (0, 0, 0.0, 100.0), "B": (0, 0, 3550.0, 100.0)},
                          [PlannedMachine(0, FAST)])
        assert objectives(s, PricingPolicy(3600)).cost == 20.0


class TestValidate:
    def test_precedence(self):
        dag = make_dag({"A": 1, "B": 1}, [("A", "B")])
        s = hand_schedule(dag, {"A": (0, 0, 0.0, 10.0), "B": (1, 0, 5.0, 10.0)},
                          [PlannedMachine(0, FAST), PlannedMachine(1, FAST)])
        with pytest.raises(ScheduleError, match="precedence"):
            s.validate()

    def test_capacity(self):
        dag = make_dag({"A": 1, "B": 1})
        s = hand_schedule(dag, {"A": (0, 0, 0.0, 10.0), "B": (0, 0, 5.0, 10.0)},
                          [PlannedMachine(0, FAST)])
        with pytest.raises(ScheduleError, match="capacity"):
            s.validate()

    def test_coverage(self):
        dag = make_dag({"A": 1, "B": 1})
        s = hand_schedule(dag, {"A": (0, 0, 0.0, 10.0)}, [PlannedMachine(0, FAST)])
        with pytest.raises(ScheduleError, match="coverage"):
            s.validate()


class TestGreedy:
    def test_single_task(self):
        s = greedy_min_makespan(make_dag({"A": 100}), [SLOW, FAST], RuntimeProfile())
        assert len(s.machines) == 1
        assert s.machines[0].type == FAST
        assert s.makespan == 50.0

    def test_independent_tasks_run_in_parallel(self):
        s = greedy_min_makespan(make_dag({"A": 100, "B": 100}), [FAST], RuntimeProfile())
        assert len(s.machines) == 2
        assert s.makespan == 50.0

    def test_chain_stays_on_one_machine(self):
        s = greedy_min_makespan(make_dag({"A": 100, "B": 100}, [("A", "B")]), [FAST],
                                RuntimeProfile())
        assert len(s.machines) == 1
        assert s.makespan == 100.0

    def test_capacity_falls_back_to_next_fastest(self):
        fast = InstanceType("fast", Venue.PUBLIC, 1, 2.0, 10.0, 1)
        # queueing B behind A on the fast machine ends at 80; a slow machine ends at 60
        s = greedy_min_makespan(make_dag({"A": 100, "B": 60}), [fast, SLOW], RuntimeProfile())
        assert s.type_counts() == {"fast": 1, "slow": 1}
        assert s.makespan == 60.0

    def test_max_machines_caps_unlimited_types(self):
        dag = make_dag({t: 100 for t in "ABCDEF"})
        s = greedy_min_makespan(dag, [FAST], RuntimeProfile(), max_machines=2)
        assert len(s.machines) == 2
        s.validate()

    def test_empty_dag_rejected(self, dengue):
        dag = iteration_instance(dengue, 0)
        empty = type(dag)(dengue, 0, (), ())
        with pytest.raises(ScheduleError):
            greedy_min_makespan(empty, [FAST], RuntimeProfile())

    def test_dengue_deterministic(self, dengue):
        dag = iteration_instance(dengue, 0)
        a = greedy_min_makespan(dag, default_catalog(), RuntimeProfile())
        b = greedy_min_makespan(dag, default_catalog(), RuntimeProfile())
        assert dumps_schedules([a]) == dumps_schedules([b])

    def test_fixed_machines(self):
        dag = make_dag({"A": 100, "B": 100})
        s = schedule_on_machines(dag, [PlannedMachine(5, SLOW)], [SLOW], RuntimeProfile())
        assert {a.machine_id for a in s.assignments} == {5}
        assert s.makespan == 200.0


class TestConsolidate:
    def test_single_machine_is_fixed_point(self):
        dag = make_dag({"A": 10, "B": 10}, [("A", "B")])
        s = hand_schedule(dag, {"A": (0, 0, 0.0, 10.0), "B": (0, 0, 10.0, 10.0)},
                          [PlannedMachine(0, SLOW)])
        assert consolidate(s, PricingPolicy()) == s

    def test_two_short_machines_merge(self):
        dag = make_dag({"X": 100, "A": 30, "B": 30})
        machines = [PlannedMachine(i, SLOW) for i in range(3)]
        s = hand_schedule(dag, {"X": (0, 0, 0.0, 100.0), "A": (1, 0, 0.0, 30.0),
                                "B": (2, 0, 0.0, 30.0)}, machines)
        out = consolidate(s, PricingPolicy())
        out.validate()
        assert len(out.used_machines()) == 2
        assert out.makespan == s.makespan
        assert objectives(out, PricingPolicy()).cost < objectives(s, PricingPolicy()).cost

    def test_never_moves_work_onto_a_billed_machine_when_that_costs_more(self):
        dag = make_dag({"X": 100, "A": 30})
        s = hand_schedule(dag, {"X": (0, 0, 0.0, 100.0), "A": (1, 0, 0.0, 30.0)},
                          [PlannedMachine(0, InstanceType("p2", Venue.PUBLIC, 2, 1.0, 5.0)),
                           PlannedMachine(1, InstanceType("free", Venue.PRIVATE, 1, 1.0))])
        out = consolidate(s, PricingPolicy())
        assert objectives(out, PricingPolicy()).cost <= objectives(s, PricingPolicy()).cost

    def test_dengue_half_runtimes_frees_machines(self, dengue):
        dag = iteration_instance(dengue, 0)
        profile = half_nominal_profile(dengue)
        greedy = greedy_min_makespan(dag, default_catalog(), profile)
        out = consolidate(greedy, PricingPolicy())
        out.validate()
        assert len(out.used_machines()) < len(greedy.used_machines())
        assert out.makespan == greedy.makespan


class TestDowngrade:
    def test_no_public_machines(self):
        dag = make_dag({"A": 10})
        s = hand_schedule(dag, {"A": (0, 0, 0.0, 10.0)}, [PlannedMachine(0, PRIVATE)])
        assert downgrade_instances(s, [PRIVATE, FAST, SLOW], PricingPolicy()) == s

    def test_idle_hour_downgrades(self):
        # 1080 s on the fast type uses 30% of the hour; 2160 s on the slow one still fits
        dag = make_dag({"A": 2160})
        s = greedy_min_makespan(dag, [FAST, SLOW], RuntimeProfile())
        assert s.makespan == 1080.0
        out = downgrade_instances(s, [FAST, SLOW], PricingPolicy(3600))
        out.validate()
        assert out.machines[0].type == SLOW
        assert out.makespan == 2160.0
        assert objectives(out, PricingPolicy(3600)).cost == 4.0 < objectives(s, PricingPolicy(3600)).cost

    def test_crossing_the_quantum_is_rejected(self):
        dag = make_dag({"A": 4000})
        s = greedy_min_makespan(dag, [FAST, SLOW], RuntimeProfile())
        assert downgrade_instances(s, [FAST, SLOW], PricingPolicy(3600)) == s

    def test_respects_capacity_of_target(self):
        slow1 = InstanceType("slow", Venue.PUBLIC, 1, 1.0, 4.0, 1)
        dag = make_dag({"A": 100, "B": 100})
        s = greedy_min_makespan(dag, [FAST], RuntimeProfile())
        out = downgrade_instances(s, [FAST, slow1], PricingPolicy(3600))
        assert out.type_counts() == {"fast": 1, "slow": 1}


def test_critical_path_bound(dengue):
    dag = iteration_instance(dengue, 0)
    # A, then the longest track B, then H, all at speed 2
    assert critical_path_bound(dag, default_catalog(), RuntimeProfile()) == (2400 + 7200 + 1200) / 2


def random_case(seed: int):
    rng = random.Random(seed)
    graph = random_workflow(rng, rng.randint(3, 12), categories=rng.choice([None, 3]))
    catalog = random_catalog(rng)
    # lift the tiny oracle capacities so larger DAGs can spread out
    catalog = [InstanceType(t.name, t.venue, t.cores, t.speed_factor, t.price_per_quantum,
                            rng.choice([None, 4])) for t in catalog]
    policy = PricingPolicy(rng.choice([300, 600, 3600]))
    return iteration_instance(graph, 0), catalog, policy


@given(st.integers(0, 10**6))
@settings(max_examples=150, deadline=None)
def test_phase_contracts(seed):
    dag, catalog, policy = random_case(seed)
    profile = RuntimeProfile()
    greedy = greedy_min_makespan(dag, catalog, profile, policy, max_machines=8)
    greedy.validate()
    assert greedy.makespan >= critical_path_bound(dag, catalog, profile) * (1 - 1e-12)
    merged = consolidate(greedy, policy)
    merged.validate()
    assert merged.makespan == greedy.makespan
    assert len(merged.used_machines()) <= len(greedy.used_machines())
    assert objectives(merged, policy).cost <= objectives(greedy, policy).cost
    cheaper = downgrade_instances(merged, catalog, policy)
    cheaper.validate()
    assert objectives(cheaper, policy).cost <= objectives(merged, policy).cost
    assert cheaper.makespan <= policy.slot_end(merged.makespan)


@given(st.integers(0, 10**6))
@settings(max_examples=30, deadline=None)
def test_plan_iteration_is_deterministic(seed):
    dag, catalog, policy = random_case(seed)
    a = plan_iteration(dag, catalog, RuntimeProfile(), policy)
    b = plan_iteration(dag, catalog, RuntimeProfile(), policy)
    assert dumps_schedules([a]) == dumps_schedules([b])


def test_task_instance_ordering():
    assert TaskInstance("A", 1) < TaskInstance("B", 0)
