"""Heuristic-versus-oracle checks, single instance or seeded batches."""

from __future__ import annotations

import random
from typing import Sequence

from .cloud import InstanceType, PricingPolicy
from .generators import random_catalog, random_workflow
from .oracle import (
    DEFAULT_MAX_MACHINES,
    DEFAULT_MAX_TASKS,
    OracleLimitExceeded,
    brute_force_optimum,
    machine_limit,
)
from .profile import RuntimeProfile
from .scheduler import consolidate, downgrade_instances, greedy_min_makespan, objectives
from .workflow import IterationDAG, iteration_instance

# Oracle batches bill in 10-minute quanta so that costs react to schedule length.
BATCH_POLICY = PricingPolicy(quantum_seconds=600)


def verify_instance(dag: IterationDAG, catalog: Sequence[InstanceType], profile: RuntimeProfile,
                    policy: PricingPolicy, max_tasks: int = DEFAULT_MAX_TASKS,
                    max_machines: int = DEFAULT_MAX_MACHINES) -> dict:
    """Compare greedy and full-heuristic objectives with the exhaustive frontier."""
    if len(dag) > max_tasks:
        raise OracleLimitExceeded(f"{len(dag)} task instances exceed the oracle limit of {max_tasks}")
    limit = machine_limit(catalog, max_machines)
    greedy = greedy_min_makespan(dag, catalog, profile, policy, max_machines=limit)
    heuristic = downgrade_instances(consolidate(greedy, policy), catalog, policy)
    frontier = brute_force_optimum(dag, catalog, profile, policy, max_tasks, max_machines)
    g, h = objectives(greedy, policy), objectives(heuristic, policy)
    dominated = frontier.dominates(h.makespan, h.cost)
    return {
        "tasks": len(dag),
        "greedy": {"makespan": g.makespan, "cost": g.cost, "machines": len(greedy.machines)},
        "heuristic": {"makespan": h.makespan, "cost": h.cost,
                      "machines": len(heuristic.used_machines())},
        "frontier": [[p.makespan, p.cost] for p in frontier.points],
        "t_min": frontier.t_min,
        "m_min": frontier.m_min,
        "greedy_ge_t_min": g.makespan >= frontier.t_min,
        "greedy_eq_t_min": g.makespan == frontier.t_min,
        "heuristic_dominated": dominated is not None,
        "dominated_by": None if dominated is None else [dominated.makespan, dominated.cost],
    }


def random_instance(seed: int, n_tasks: int, max_machines: int = 3):
    rng = random.Random(seed)
    graph = random_workflow(rng, n_tasks)
    catalog = random_catalog(rng, max_total=max_machines)
    return iteration_instance(graph, 0), catalog


def oracle_batch(count: int = 100, n_tasks: int = 5, seed: int = 0,
                 max_tasks: int = 6, max_machines: int = 3) -> dict:
    """Dominance tally over ``count`` seeded random instances.

    Dominated heuristic points are findings to report, not failures.
    """
    records = []
    for i in range(count):
        dag, catalog = random_instance(seed + i, n_tasks, max_machines)
        record = verify_instance(dag, catalog, RuntimeProfile(), BATCH_POLICY,
                                 max_tasks, max_machines)
        record["seed"] = seed + i
        records.append(record)
    dominated = sum(r["heuristic_dominated"] for r in records)
    return {
        "instances": count,
        "tasks_per_instance": n_tasks,
        "greedy_below_t_min": sum(not r["greedy_ge_t_min"] for r in records),
        "greedy_equal_t_min": sum(r["greedy_eq_t_min"] for r in records),
        "heuristic_dominated": dominated,
        "dominance_violation_rate": dominated / count if count else 0.0,
        "records": records,
    }
