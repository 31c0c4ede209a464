from __future__ import annotations

import pytest

from hybridflow.cloud import InstanceType, PricingPolicy, Venue
from hybridflow.workflow import TaskSpec, WorkflowGraph, builtin_dengue_workflow, iteration_instance


def make_graph(works: dict[str, float], edges=(), loop=None, max_iterations=1) -> WorkflowGraph:
    tasks = tuple(TaskSpec(tid, f"cat-{tid}", work) for tid, work in works.items())
    return WorkflowGraph(tasks, tuple(edges), loop, max_iterations)


def make_dag(works: dict[str, float], edges=()):
    return iteration_instance(make_graph(works, edges), 0)


PRIVATE = InstanceType("priv", Venue.PRIVATE, 1, 1.0, 0.0, None)
FAST = InstanceType("fast", Venue.PUBLIC, 1, 2.0, 10.0, None)
SLOW = InstanceType("slow", Venue.PUBLIC, 1, 1.0, 4.0, None)


@pytest.fixture
def policy() -> PricingPolicy:
    return PricingPolicy(quantum_seconds=3600, min_quanta=1)


@pytest.fixture
def dengue() -> WorkflowGraph:
    return builtin_dengue_workflow()


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
