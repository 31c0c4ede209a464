"""Line-oriented serializations used for report files and golden tests.

* iteration reports: JSON Lines, one object per iteration, keys sorted
* schedules: tab-separated ``iteration task machine type start end``
* traces: tab-separated ``iteration task machine actual_start actual_end``
  (absolute simulation time)

Floats are written with ``repr`` so values round-trip exactly.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

from .optimizer import IterationReport
from .scheduler import Schedule
from .simulation import ExecutionTrace

SCHEDULE_HEADER = "iteration\ttask\tmachine\ttype\tstart\tend"
TRACE_HEADER = "iteration\ttask\tmachine\tactual_start\tactual_end"


def report_record(report: IterationReport) -> dict:
    record = asdict(report)
    record["machines_total"] = report.machines_total
    return record


def dumps_reports(reports: Iterable[IterationReport]) -> str:
    return "".join(json.dumps(report_record(r), sort_keys=True) + "\n" for r in reports)


def loads_reports(text: str) -> list[dict]:
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def schedule_lines(schedule: Schedule) -> list[str]:
    types = {m.id: m.type.name for m in schedule.machines}
    return [
        f"{a.instance.iteration}\t{a.instance.task_id}\t{a.machine_id}\t"
        f"{types[a.machine_id]}\t{a.start!r}\t{a.end!r}"
        for a in schedule.assignments
    ]


def dumps_schedules(schedules: Iterable[Schedule]) -> str:
    lines = [SCHEDULE_HEADER]
    for schedule in schedules:
        lines += schedule_lines(schedule)
    return "\n".join(lines) + "\n"


def trace_lines(trace: ExecutionTrace) -> list[str]:
    return [
        f"{r.instance.iteration}\t{r.instance.task_id}\t{r.machine_id}\t"
        f"{trace.offset + r.start!r}\t{trace.offset + r.end!r}"
        for r in trace.runs
    ]


def dumps_traces(traces: Iterable[ExecutionTrace]) -> str:
    lines = [TRACE_HEADER]
    for trace in traces:
        lines += trace_lines(trace)
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ModeTotals:
    total_makespan: float
    total_cost: float
    total_energy: float

    @classmethod
    def from_records(cls, records: Sequence[dict]) -> ModeTotals:
        """Totals from raw iteration records; iterations run back to back."""
        if not records:
            return cls(0.0, 0.0, 0.0)
        return cls(
            total_makespan=sum(r["makespan_actual"] for r in records),
            total_cost=records[-1]["cost_to_date"],
            total_energy=records[-1]["energy_to_date"],
        )


def _delta(new: float, base: float) -> float | None:
    """Signed percentage change from ``base`` to ``new``."""
    if base == 0:
        return None
    return (new - base) / base * 100.0


@dataclass(frozen=True)
class ComparisonSummary:
    greedy: ModeTotals | None
    iterative: ModeTotals | None

    @property
    def deltas(self) -> dict[str, float | None] | None:
        if self.greedy is None or self.iterative is None:
            return None
        return {
            "makespan_pct": _delta(self.iterative.total_makespan, self.greedy.total_makespan),
            "cost_pct": _delta(self.iterative.total_cost, self.greedy.total_cost),
            "energy_pct": _delta(self.iterative.total_energy, self.greedy.total_energy),
        }

    @classmethod
    def from_records(cls, by_mode: dict[str, Sequence[dict]]) -> ComparisonSummary:
        totals = {mode: ModeTotals.from_records(recs) for mode, recs in by_mode.items()}
        return cls(totals.get("greedy"), totals.get("iterative"))

    def to_dict(self) -> dict:
        out: dict = {}
        for mode in ("greedy", "iterative"):
            totals = getattr(self, mode)
            if totals is not None:
                out[mode] = asdict(totals)
        if self.deltas is not None:
            out["delta_iterative_vs_greedy"] = self.deltas
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"
