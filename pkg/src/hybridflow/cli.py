"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 validation error (invalid
workflow, oracle limits exceeded), 4 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .oracle import OracleLimitExceeded
from .optimizer import run_iterations
from .profile import RuntimeProfile
from .reports import ComparisonSummary, dumps_reports, dumps_schedules, dumps_traces, loads_reports
from .scenario import ConfigError, ScenarioConfig, load_scenario
from .verification import oracle_batch, verify_instance
from .workflow import WorkflowError, iteration_instance, parse_workflow, topological_order

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VALIDATION = 3
EXIT_RUNTIME = 4

log = logging.getLogger("hybridflow")


def run_scenario(config: ScenarioConfig, out: Path, trace: bool = False,
                 oracle_limits: tuple[int, int] | None = None) -> dict[str, str]:
    """Run every mode of ``config`` and write the report files into ``out``.

    Nothing is written unless the whole run succeeds. Returns the file
    contents keyed by file name.
    """
    files: dict[str, str] = {}
    records = {}
    for mode in config.modes():
        result = run_iterations(config, mode)
        text = dumps_reports(result.reports)
        files[f"iterations-{mode}.jsonl"] = text
        records[mode] = loads_reports(text)
        if trace:
            files[f"schedules-{mode}.tsv"] = dumps_schedules(result.schedules)
            files[f"trace-{mode}.tsv"] = dumps_traces(result.traces)
    if len(records) == 2:
        files["summary.json"] = ComparisonSummary.from_records(records).dumps()
    if oracle_limits is not None:
        files["oracle.json"] = json.dumps(verify_oracle(config, *oracle_limits),
                                          indent=2, sort_keys=True) + "\n"
    out.mkdir(parents=True, exist_ok=True)
    for name, text in sorted(files.items()):
        (out / name).write_text(text)
    return files


def verify_oracle(config: ScenarioConfig, max_tasks: int, max_machines: int) -> dict:
    """Heuristic against the exhaustive frontier on the scenario's first iteration."""
    dag = iteration_instance(config.workflow, 0)
    return verify_instance(dag, config.catalog, RuntimeProfile(), config.policy,
                           max_tasks, max_machines)


def _cmd_run(args) -> int:
    config = load_scenario(args.scenario)
    if args.mode:
        config = config.with_mode(args.mode)
    if args.seed is not None:
        config = config.with_seed(args.seed)
    limits = (args.max_tasks, args.max_machines) if args.verify_oracle else None
    files = run_scenario(config, Path(args.out), args.trace, limits)
    for mode in config.modes():
        last = loads_reports(files[f"iterations-{mode}.jsonl"])[-1]
        print(f"{mode}: iterations={last['iteration'] + 1} cost={last['cost_to_date']:.4f} "
              f"energy={last['energy_to_date']:.1f}")
    if "summary.json" in files:
        deltas = json.loads(files["summary.json"])["delta_iterative_vs_greedy"]
        print("iterative vs greedy: " + " ".join(
            f"{k}={'n/a' if v is None else f'{v:+.2f}%'}" for k, v in sorted(deltas.items())))
    if "oracle.json" in files:
        report = json.loads(files["oracle.json"])
        print(f"oracle: t_min={report['t_min']:.3f} m_min={report['m_min']:.4f} "
              f"heuristic_dominated={report['heuristic_dominated']}")
    print(f"reports written to {args.out}")
    return EXIT_OK


def _cmd_oracle_batch(args) -> int:
    tally = oracle_batch(args.count, args.tasks, args.seed, args.max_tasks, args.max_machines)
    if args.out:
        Path(args.out).write_text(json.dumps(tally, indent=2, sort_keys=True) + "\n")
    summary = {k: v for k, v in tally.items() if k != "records"}
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def _cmd_validate(args) -> int:
    try:
        text = Path(args.workflow).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read workflow {args.workflow}: {exc.strerror}") from None
    graph = parse_workflow(text)
    loop = "none" if graph.loop_edge is None else "->".join(graph.loop_edge)
    print(f"tasks={len(graph.tasks)} edges={len(graph.edges)} loop={loop} "
          f"max_iterations={graph.max_iterations}")
    print("order: " + " ".join(topological_order(graph)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hybridflow", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario and write iteration reports")
    run.add_argument("scenario", help="scenario TOML file, or a bundled name such as 'dengue'")
    run.add_argument("--mode", choices=["greedy", "iterative", "both"])
    run.add_argument("--seed", type=int, help="override the noise seed")
    run.add_argument("--out", default="out", help="output directory (default: out)")
    run.add_argument("--trace", action="store_true", help="also export schedules and traces")
    run.add_argument("--verify-oracle", action="store_true",
                     help="compare the first iteration against the exhaustive frontier")
    run.add_argument("--max-tasks", type=int, default=6)
    run.add_argument("--max-machines", type=int, default=3)
    run.set_defaults(func=_cmd_run)

    batch = sub.add_parser("oracle-batch", help="dominance tally over random small instances")
    batch.add_argument("--count", type=int, default=100)
    batch.add_argument("--tasks", type=int, default=5)
    batch.add_argument("--seed", type=int, default=0)
    batch.add_argument("--max-tasks", type=int, default=6)
    batch.add_argument("--max-machines", type=int, default=3)
    batch.add_argument("--out", help="write the full per-instance tally to this JSON file")
    batch.set_defaults(func=_cmd_oracle_batch)

    validate = sub.add_parser("validate", help="check a workflow document")
    validate.add_argument("workflow")
    validate.set_defaults(func=_cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except (WorkflowError, OracleLimitExceeded) as exc:
        log.error("validation error: %s", exc)
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001 - mapped to the runtime exit code
        log.error("runtime error: %s", exc)
        if args.verbose:
            raise
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
