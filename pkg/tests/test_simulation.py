from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridflow.cloud import InstanceType, LeaseError, PricingPolicy, ResourcePool, Venue, default_catalog
from hybridflow.generators import random_catalog, random_workflow
from hybridflow.profile import RuntimeProfile
from hybridflow.reports import dumps_traces
from hybridflow.scheduler import (
    PlannedMachine,
    consolidate,
    critical_path_bound,
    greedy_min_makespan,
    objectives,
    plan_iteration,
    schedule_on_machines,
)
from hybridflow.simulation import ExecutionTrace, Metrics, NoiseModel, PowerModel, account, execute
from hybridflow.workflow import iteration_instance

from .conftest import SLOW, make_dag

QUIET = NoiseModel()


def check_trace(schedule, trace):
    runs = {r.instance: r for r in trace.runs}
    assert set(runs) == set(schedule.dag.instances)
    for u, v in schedule.dag.edges:
        assert runs[u].end <= runs[v].start
    lanes = {}
    for r in trace.runs:
        lanes.setdefault((r.machine_id, r.core), []).append(r)
    for lane in lanes.values():
        lane.sort(key=lambda r: r.start)
        for a, b in zip(lane, lane[1:]):
            assert a.end <= b.start
    assert all(r.end > r.start for r in trace.runs)


class TestNoiseModel:
    def test_seed_required(self):
        with pytest.raises(ValueError, match="seed"):
            NoiseModel("uniform_factor")

    def test_bounds(self):
        with pytest.raises(ValueError):
            NoiseModel("uniform_factor", low=1.5, high=1.0, seed=1)

    def test_factor_depends_only_on_instance(self):
        noise = NoiseModel("uniform_factor", seed=9)
        dag = make_dag({"A": 1, "B": 1})
        a, b = dag.instances
        assert noise.factor(a) == noise.factor(a)
        assert 0.8 <= noise.factor(a) <= 1.2
        assert noise.factor(a) != noise.factor(b)


class TestExecute:
    def test_zero_noise_identity(self, dengue):
        schedule = plan_iteration(iteration_instance(dengue, 0), default_catalog(),
                                  RuntimeProfile(), PricingPolicy())
        trace = execute(schedule, QUIET)
        planned = schedule.by_instance()
        for r in trace.runs:
            assert (r.start, r.end) == (planned[r.instance].start, planned[r.instance].end)
        assert trace.makespan == schedule.makespan

    def test_late_predecessor_delays_successor(self):
        dag = make_dag({"A": 100, "B": 100}, [("A", "B")])
        schedule = greedy_min_makespan(dag, [SLOW], RuntimeProfile())
        trace = execute(schedule, NoiseModel("uniform_factor", low=2.0, high=2.0, seed=0))
        runs = {r.instance.task_id: r for r in trace.runs}
        assert runs["A"].end == 200.0
        assert runs["B"].start == runs["A"].end
        assert runs["B"].start != schedule.by_instance()[dag.instances[1]].start

    def test_early_finish_does_not_pull_work_forward(self):
        dag = make_dag({"A": 100, "B": 100}, [("A", "B")])
        schedule = greedy_min_makespan(dag, [SLOW], RuntimeProfile())
        trace = execute(schedule, NoiseModel("uniform_factor", low=0.5, high=0.5, seed=0))
        runs = {r.instance.task_id: r for r in trace.runs}
        assert runs["B"].start == 100.0

    def test_dengue_trace_is_reproducible(self, dengue):
        schedule = plan_iteration(iteration_instance(dengue, 0), default_catalog(),
                                  RuntimeProfile(), PricingPolicy())
        noise = NoiseModel("uniform_factor", seed=42, bias=0.5)
        first = dumps_traces([execute(schedule, noise)])
        assert first == dumps_traces([execute(schedule, noise)])
        assert first != dumps_traces([execute(schedule, NoiseModel("uniform_factor", seed=43, bias=0.5))])


class TestAccount:
    def test_empty(self):
        metrics = account(ExecutionTrace(()), ResourcePool(default_catalog()), PricingPolicy())
        assert (metrics.makespan_actual, metrics.cost, metrics.energy_proxy) == (0.0, 0.0, 0.0)

    def one_machine_run(self, itype, works):
        pool = ResourcePool([itype])
        m = pool.provision(itype.name, 0.0)
        schedule = schedule_on_machines(make_dag(works), [PlannedMachine(m.id, itype)], [itype],
                                        RuntimeProfile())
        trace = execute(schedule, QUIET)
        pool.release(m.id, trace.makespan)
        return trace, pool

    def test_single_public_task(self):
        itype = InstanceType("pub", Venue.PUBLIC, 1, 1.0, 10.0)
        trace, pool = self.one_machine_run(itype, {"A": 50})
        metrics = account(trace, pool, PricingPolicy(3600), PowerModel(busy_power=2.0))
        assert metrics.cost == 10.0
        assert metrics.energy_proxy == 100.0

    def test_overlapping_tasks_add_core_seconds(self):
        itype = InstanceType("pub2", Venue.PUBLIC, 2, 1.0, 10.0)
        trace, pool = self.one_machine_run(itype, {"A": 50, "B": 50})
        assert trace.makespan == 50.0
        metrics = account(trace, pool, PricingPolicy(3600))
        assert metrics.energy_proxy == 100.0
        assert metrics.machine_hours == {"pub2": 50 / 3600}

    def test_idle_power_charges_leased_idle_cores(self):
        itype = InstanceType("pub2", Venue.PUBLIC, 2, 1.0, 10.0)
        trace, pool = self.one_machine_run(itype, {"A": 50})
        metrics = account(trace, pool, PricingPolicy(3600), PowerModel(1.0, 0.5))
        assert metrics.energy_proxy == 50.0 + 50 * 0.5

    def test_open_lease_rejected(self):
        pool = ResourcePool([SLOW])
        m = pool.provision("slow", 0.0)
        schedule = schedule_on_machines(make_dag({"A": 5}), [PlannedMachine(m.id, SLOW)], [SLOW],
                                        RuntimeProfile())
        with pytest.raises(LeaseError):
            account(execute(schedule, QUIET), pool, PricingPolicy())

    def test_metrics_type(self):
        assert Metrics(0.0, 0.0, 0.0).machine_hours == {}


def random_plan(seed):
    rng = random.Random(seed)
    graph = random_workflow(rng, rng.randint(3, 10))
    catalog = [InstanceType(t.name, t.venue, t.cores, t.speed_factor, t.price_per_quantum, None)
               for t in random_catalog(rng)]
    return iteration_instance(graph, 0), catalog


@given(st.integers(0, 10**6), st.integers(0, 1000))
@settings(max_examples=80, deadline=None)
def test_noisy_makespan_within_bounds(seed, noise_seed):
    dag, catalog = random_plan(seed)
    schedule = plan_iteration(dag, catalog, RuntimeProfile(), PricingPolicy(600), max_machines=6)
    noise = NoiseModel("uniform_factor", low=0.8, high=1.2, seed=noise_seed)
    trace = execute(schedule, noise)
    check_trace(schedule, trace)
    lower = 0.8 * critical_path_bound(dag, catalog, RuntimeProfile())
    assert lower * (1 - 1e-12) <= trace.makespan <= 1.2 * schedule.makespan * (1 + 1e-12)


@given(st.integers(0, 10**6))
@settings(max_examples=80, deadline=None)
def test_consolidation_keeps_energy_and_does_not_raise_cost(seed):
    dag, catalog = random_plan(seed)
    policy = PricingPolicy(600)
    greedy = greedy_min_makespan(dag, catalog, RuntimeProfile(), max_machines=6)
    merged = consolidate(greedy, policy)
    before, after = execute(greedy, QUIET), execute(merged, QUIET)
    assert after.busy_core_seconds == pytest.approx(before.busy_core_seconds, rel=1e-12)
    assert after.makespan == before.makespan == greedy.makespan
    assert objectives(merged, policy).cost <= objectives(greedy, policy).cost
