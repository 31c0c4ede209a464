"""Iterative workflow graphs: a DAG of tasks plus one declared loop edge.

The on-disk workflow document is line oriented. Blank lines and text after
``#`` are ignored; every other line is one record::

    task <id> <category> <nominal_work> <output_data>
    edge <source> <target>
    loop <source> <target> <max_iterations>

At most one ``loop`` line is allowed. A workflow without a loop runs for a
single iteration.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Iterable


class WorkflowError(ValueError):
    """Base class for workflow document and graph errors."""

    def __init__(self, message: str, element: str | None = None):
        super().__init__(message if element is None else f"{message}: {element}")
        self.element = element


class WorkflowSyntaxError(WorkflowError):
    """The document could not be tokenized into records."""

    def __init__(self, message: str, line_no: int, element: str | None = None):
        super().__init__(f"line {line_no}: {message}", element)
        self.line_no = line_no


class WorkflowSemanticError(WorkflowError):
    """The records parse but describe an invalid graph."""

    def __init__(self, kind: str, element: str):
        super().__init__(kind, element)
        self.kind = kind


@dataclass(frozen=True, order=True)
class TaskSpec:
    id: str
    category: str
    nominal_work: float
    output_data: float = 0.0

    def __post_init__(self):
        if not self.id or any(ch.isspace() for ch in self.id):
            raise WorkflowSemanticError("invalid task id", repr(self.id))
        if not self.category or any(ch.isspace() for ch in self.category):
            raise WorkflowSemanticError("invalid category", self.id)
        if not self.nominal_work > 0:
            raise WorkflowSemanticError("nominal_work must be positive", self.id)
        if not self.output_data >= 0:
            raise WorkflowSemanticError("output_data must be non-negative", self.id)


@dataclass(frozen=True, order=True)
class TaskInstance:
    """One execution of a task within a given loop iteration."""

    task_id: str
    iteration: int

    def __str__(self) -> str:
        return f"{self.task_id}#{self.iteration}"


@dataclass(frozen=True)
class WorkflowGraph:
    tasks: tuple[TaskSpec, ...]
    edges: tuple[tuple[str, str], ...]
    loop_edge: tuple[str, str] | None = None
    max_iterations: int = 1
    _index: dict[str, TaskSpec] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        tasks = tuple(sorted(self.tasks, key=lambda t: t.id))
        edges = tuple(sorted(set((str(u), str(v)) for u, v in self.edges)))
        object.__setattr__(self, "tasks", tasks)
        object.__setattr__(self, "edges", edges)
        if self.loop_edge is not None:
            object.__setattr__(self, "loop_edge", tuple(self.loop_edge))

        index: dict[str, TaskSpec] = {}
        for task in tasks:
            if task.id in index:
                raise WorkflowSemanticError("duplicate task", task.id)
            index[task.id] = task
        object.__setattr__(self, "_index", index)

        if not tasks:
            raise WorkflowSemanticError("empty workflow", "<tasks>")
        for u, v in edges:
            for end in (u, v):
                if end not in index:
                    raise WorkflowSemanticError("dangling edge", f"{u}->{v}")
            if u == v:
                raise WorkflowSemanticError("cycle", f"{u}->{v}")
        _check_acyclic(index, edges)

        if not isinstance(self.max_iterations, int) or self.max_iterations < 1:
            raise WorkflowSemanticError("max_iterations must be a positive integer",
                                        str(self.max_iterations))
        if self.loop_edge is None:
            if self.max_iterations != 1:
                raise WorkflowSemanticError("max_iterations > 1 requires a loop",
                                            str(self.max_iterations))
        else:
            src, dst = self.loop_edge
            for end in (src, dst):
                if end not in index:
                    raise WorkflowSemanticError("dangling loop edge", f"{src}->{dst}")
            if dst != src and dst not in self.ancestors(src):
                raise WorkflowSemanticError("loop target is not an ancestor of its source",
                                            f"{src}->{dst}")

    def task(self, task_id: str) -> TaskSpec:
        return self._index[task_id]

    @property
    def task_ids(self) -> tuple[str, ...]:
        return tuple(t.id for t in self.tasks)

    def predecessors(self, task_id: str) -> list[str]:
        return [u for u, v in self.edges if v == task_id]

    def successors(self, task_id: str) -> list[str]:
        return [v for u, v in self.edges if u == task_id]

    def ancestors(self, task_id: str) -> set[str]:
        seen: set[str] = set()
        stack = self.predecessors(task_id)
        while stack:
            node = stack.pop()
            if node not in seen:
                seen.add(node)
                stack.extend(self.predecessors(node))
        return seen

    def descendants(self, task_id: str) -> set[str]:
        seen: set[str] = set()
        stack = self.successors(task_id)
        while stack:
            node = stack.pop()
            if node not in seen:
                seen.add(node)
                stack.extend(self.successors(node))
        return seen


def _check_acyclic(index: dict[str, TaskSpec], edges: Iterable[tuple[str, str]]) -> None:
    succ: dict[str, list[str]] = {tid: [] for tid in index}
    for u, v in edges:
        succ[u].append(v)
    WHITE, GREY, BLACK = 0, 1, 2
    color = dict.fromkeys(index, WHITE)
    for root in sorted(index):
        if color[root] != WHITE:
            continue
        color[root] = GREY
        stack = [(root, iter(sorted(succ[root])))]
        while stack:
            node, children = stack[-1]
            child = next(children, None)
            if child is None:
                color[node] = BLACK
                stack.pop()
            elif color[child] == GREY:
                raise WorkflowSemanticError("cycle", f"{node}->{child}")
            elif color[child] == WHITE:
                color[child] = GREY
                stack.append((child, iter(sorted(succ[child]))))


def topological_order(graph: WorkflowGraph) -> list[str]:
    """Kahn's algorithm; ready tasks are released in lexicographic id order."""
    indegree = {tid: 0 for tid in graph.task_ids}
    succ: dict[str, list[str]] = {tid: [] for tid in graph.task_ids}
    for u, v in graph.edges:
        indegree[v] += 1
        succ[u].append(v)
    ready = [tid for tid, deg in indegree.items() if deg == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        node = heapq.heappop(ready)
        order.append(node)
        for child in succ[node]:
            indegree[child] -= 1
            if indegree[child] == 0:
                heapq.heappush(ready, child)
    return order


@dataclass(frozen=True)
class IterationDAG:
    """The acyclic task-instance graph executed in one loop iteration."""

    graph: WorkflowGraph
    iteration: int
    instances: tuple[TaskInstance, ...]
    edges: tuple[tuple[TaskInstance, TaskInstance], ...]

    def spec(self, instance: TaskInstance) -> TaskSpec:
        return self.graph.task(instance.task_id)

    def predecessors(self, instance: TaskInstance) -> list[TaskInstance]:
        return [u for u, v in self.edges if v == instance]

    def successors(self, instance: TaskInstance) -> list[TaskInstance]:
        return [v for u, v in self.edges if u == instance]

    def __len__(self) -> int:
        return len(self.instances)


def iteration_instance(graph: WorkflowGraph, k: int) -> IterationDAG:
    """Materialize the task instances executed in iteration ``k``.

    Iteration 0 runs every task. Later iterations re-run the loop target and
    everything reachable from it; the loop edge itself never becomes an
    intra-iteration dependency.
    """
    if not 0 <= k < graph.max_iterations:
        raise IndexError(f"iteration {k} outside [0, {graph.max_iterations})")
    if k == 0 or graph.loop_edge is None:
        members = set(graph.task_ids)
    else:
        target = graph.loop_edge[1]
        members = {target} | graph.descendants(target)
    order = [tid for tid in topological_order(graph) if tid in members]
    instances = tuple(TaskInstance(tid, k) for tid in order)
    edges = tuple(
        (TaskInstance(u, k), TaskInstance(v, k))
        for u, v in graph.edges
        if u in members and v in members
    )
    return IterationDAG(graph, k, instances, edges)


def _number(token: str, what: str, line_no: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise WorkflowSyntaxError(f"{what} is not a number", line_no, token) from None


def parse_workflow(text: str) -> WorkflowGraph:
    tasks: list[TaskSpec] = []
    edges: list[tuple[str, str]] = []
    loop: tuple[str, str] | None = None
    max_iterations = 1
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        keyword, *args = line.split()
        if keyword == "task":
            if len(args) != 4:
                raise WorkflowSyntaxError("task needs: id category nominal_work output_data",
                                          line_no, line)
            tid, category, work, data = args
            tasks.append(TaskSpec(tid, category, _number(work, "nominal_work", line_no),
                                  _number(data, "output_data", line_no)))
        elif keyword == "edge":
            if len(args) != 2:
                raise WorkflowSyntaxError("edge needs: source target", line_no, line)
            edges.append((args[0], args[1]))
        elif keyword == "loop":
            if len(args) != 3:
                raise WorkflowSyntaxError("loop needs: source target max_iterations",
                                          line_no, line)
            if loop is not None:
                raise WorkflowSyntaxError("more than one loop declared", line_no, line)
            try:
                max_iterations = int(args[2])
            except ValueError:
                raise WorkflowSyntaxError("max_iterations is not an integer",
                                          line_no, args[2]) from None
            loop = (args[0], args[1])
        else:
            raise WorkflowSyntaxError("unknown record", line_no, keyword)
    return WorkflowGraph(tuple(tasks), tuple(edges), loop, max_iterations)


def render_workflow(graph: WorkflowGraph) -> str:
    """Inverse of :func:`parse_workflow`."""
    lines = [
        f"task {t.id} {t.category} {t.nominal_work!r} {t.output_data!r}" for t in graph.tasks
    ]
    lines += [f"edge {u} {v}" for u, v in graph.edges]
    if graph.loop_edge is not None:
        src, dst = graph.loop_edge
        lines.append(f"loop {src} {dst} {graph.max_iterations}")
    return "\n".join(lines) + "\n"


# Relative sizes of the six parallel data tracks are a modeling choice: the
# tracks must differ in length for consolidation to have idle capacity to use.
DENGUE_TASKS = (
    TaskSpec("A", "extract", 2400.0, 500.0),
    TaskSpec("B", "track-incidence", 7200.0, 120.0),
    TaskSpec("C", "track-temperature", 4800.0, 80.0),
    TaskSpec("D", "track-rainfall", 4000.0, 80.0),
    TaskSpec("E", "track-humidity", 3200.0, 60.0),
    TaskSpec("F", "track-geography", 1800.0, 40.0),
    TaskSpec("G", "track-mobility", 1200.0, 20.0),
    TaskSpec("H", "predict", 1200.0, 10.0),
)


def builtin_dengue_workflow(max_iterations: int = 5) -> WorkflowGraph:
    """Eight-stage dengue prediction workflow: A fans out to tracks B..G, which join at H.

    H loops back to A, so every iteration re-runs the full pipeline on the
    next time window.
    """
    tracks = "BCDEFG"
    edges = [("A", t) for t in tracks] + [(t, "H") for t in tracks]
    return WorkflowGraph(DENGUE_TASKS, tuple(edges), ("H", "A"), max_iterations)
