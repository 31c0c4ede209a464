"""Seeded random workflows and catalogs for property tests and oracle batches."""

from __future__ import annotations

import random

from .cloud import InstanceType, Venue
from .workflow import TaskSpec, WorkflowGraph


def random_workflow(rng: random.Random, n_tasks: int, edge_prob: float = 0.3,
                    work: tuple[float, float] = (60.0, 900.0),
                    categories: int | None = None) -> WorkflowGraph:
    """Random loopless DAG; edges only run from lower to higher task index.

    With ``categories`` set, tasks share that many profile categories.
    """
    width = len(str(n_tasks - 1))
    ids = [f"t{i:0{width}d}" for i in range(n_tasks)]
    tasks = []
    for i, tid in enumerate(ids):
        category = f"c{rng.randrange(categories)}" if categories else f"c{i}"
        tasks.append(TaskSpec(tid, category, round(rng.uniform(*work), 3),
                              round(rng.uniform(0, 100), 3)))
    edges = [(ids[i], ids[j]) for i in range(n_tasks) for j in range(i + 1, n_tasks)
             if rng.random() < edge_prob]
    return WorkflowGraph(tuple(tasks), tuple(edges))


def random_catalog(rng: random.Random, max_total: int | None = None) -> list[InstanceType]:
    """A private type plus one or two public types of different price and speed.

    ``max_total`` bounds the summed capacity limits, which keeps the
    instance inside an oracle machine limit.
    """
    fast = round(rng.uniform(1.5, 3.0), 2)
    catalog = [
        InstanceType("priv", Venue.PRIVATE, rng.choice([1, 2]), 1.0, 0.0, 1),
        InstanceType("pub-fast", Venue.PUBLIC, rng.choice([1, 2]), fast,
                     round(rng.uniform(0.5, 2.0), 2), 1),
    ]
    if rng.random() < 0.5:
        catalog.append(InstanceType("pub-slow", Venue.PUBLIC, rng.choice([1, 2]),
                                    round(rng.uniform(0.8, fast - 0.2), 2),
                                    round(catalog[1].price_per_quantum * rng.uniform(0.3, 0.8), 2), 1))
    if max_total is None:
        return catalog
    while sum(t.capacity_limit for t in catalog) > max_total:
        catalog.pop()
    return catalog
