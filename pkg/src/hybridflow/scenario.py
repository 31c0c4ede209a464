"""Scenario configuration files (TOML).

Example::

    name = "dengue"
    mode = "both"              # greedy | iterative | both
    max_machines = 64          # cap for instance types without capacity_limit

    [workflow]
    builtin = "dengue"         # or: path = "flows/my.wf" (relative to this file)
    iterations = 5             # optional, overrides the loop's max_iterations

    [pricing]
    quantum_seconds = 3600
    min_quanta = 1

    [[instance_type]]          # repeatable; omit the section for the default catalog
    name = "public-large"
    venue = "public"
    cores = 2
    speed_factor = 2.0
    price_per_quantum = 0.34
    capacity_limit = 25

    [noise]
    kind = "uniform_factor"    # or "none"
    low = 0.8
    high = 1.2
    bias = 0.5                 # true mean runtime / nominal runtime
    seed = 42

    [replan]
    min_relative_gain = 0.05
    w_time = 1.0
    w_cost = 1.0

    [energy]
    busy_power = 1.0
    idle_power = 0.0
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Any

from .cloud import InstanceType, PricingPolicy, default_catalog
from .optimizer import ReplanThresholds
from .scheduler import DEFAULT_MACHINE_CAP
from .simulation import NoiseModel, PowerModel
from .workflow import WorkflowGraph, builtin_dengue_workflow, parse_workflow

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

MODES = ("greedy", "iterative", "both")
BUILTIN_WORKFLOWS = {"dengue": builtin_dengue_workflow}
BUILTIN_SCENARIOS = {"dengue": "dengue.toml"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    workflow: WorkflowGraph
    catalog: tuple[InstanceType, ...]
    policy: PricingPolicy = PricingPolicy()
    noise: NoiseModel = NoiseModel()
    thresholds: ReplanThresholds = ReplanThresholds()
    power: PowerModel = PowerModel()
    mode: str = "both"
    max_machines: int = DEFAULT_MACHINE_CAP
    name: str = "scenario"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.max_machines < 1:
            raise ConfigError("max_machines must be positive")

    def with_seed(self, seed: int) -> ScenarioConfig:
        return replace(self, noise=replace(self.noise, seed=seed))

    def with_mode(self, mode: str) -> ScenarioConfig:
        return replace(self, mode=mode)

    def modes(self) -> tuple[str, ...]:
        return ("greedy", "iterative") if self.mode == "both" else (self.mode,)


def _section(doc: dict, key: str, allowed: set[str]) -> dict:
    section = doc.get(key, {})
    if not isinstance(section, dict):
        raise ConfigError(f"[{key}] must be a table")
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"[{key}] unknown keys: {sorted(unknown)}")
    return section


def _build(cls, section: dict, where: str):
    try:
        return cls(**section)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{where}] {exc}") from None


def scenario_from_dict(doc: dict[str, Any], base_dir: Path | None = None) -> ScenarioConfig:
    """Build a scenario from parsed TOML.

    Workflow problems propagate as :class:`~hybridflow.workflow.WorkflowError`;
    everything else is reported as :class:`ConfigError`.
    """
    top = {"name", "mode", "max_machines", "workflow", "pricing", "instance_type",
           "noise", "replan", "energy"}
    unknown = set(doc) - top
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")

    wf = _section(doc, "workflow", {"builtin", "path", "iterations"})
    if ("builtin" in wf) == ("path" in wf):
        raise ConfigError("[workflow] needs exactly one of 'builtin' or 'path'")
    if "builtin" in wf:
        factory = BUILTIN_WORKFLOWS.get(wf["builtin"])
        if factory is None:
            raise ConfigError(f"unknown builtin workflow {wf['builtin']!r}")
        graph = factory()
    else:
        path = Path(wf["path"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read workflow {path}: {exc.strerror}") from None
        graph = parse_workflow(text)
    if "iterations" in wf:
        graph = replace(graph, max_iterations=wf["iterations"])

    policy = _build(PricingPolicy, _section(doc, "pricing", {"quantum_seconds", "min_quanta"}),
                    "pricing")

    if "instance_type" in doc:
        entries = doc["instance_type"]
        if not isinstance(entries, list) or not entries:
            raise ConfigError("[[instance_type]] must be a non-empty array of tables")
        fields = {"name", "venue", "cores", "speed_factor", "price_per_quantum", "capacity_limit"}
        catalog = []
        for entry in entries:
            unknown = set(entry) - fields
            if unknown:
                raise ConfigError(f"[[instance_type]] unknown keys: {sorted(unknown)}")
            catalog.append(_build(InstanceType, entry, "instance_type"))
        names = [t.name for t in catalog]
        if len(set(names)) != len(names):
            raise ConfigError("[[instance_type]] names must be unique")
    else:
        catalog = default_catalog()

    noise = _build(NoiseModel, _section(doc, "noise", {"kind", "low", "high", "bias", "seed"}),
                   "noise")
    thresholds = _build(ReplanThresholds,
                        _section(doc, "replan", {"min_relative_gain", "w_time", "w_cost"}),
                        "replan")
    power = _build(PowerModel, _section(doc, "energy", {"busy_power", "idle_power"}), "energy")
    return ScenarioConfig(
        workflow=graph,
        catalog=tuple(catalog),
        policy=policy,
        noise=noise,
        thresholds=thresholds,
        power=power,
        mode=doc.get("mode", "both"),
        max_machines=doc.get("max_machines", DEFAULT_MACHINE_CAP),
        name=doc.get("name", "scenario"),
    )


def load_scenario(source: str | Path) -> ScenarioConfig:
    """Load a scenario file, or a bundled scenario by name (e.g. ``"dengue"``)."""
    if isinstance(source, str) and source in BUILTIN_SCENARIOS:
        text = resources.files("hybridflow").joinpath("data", BUILTIN_SCENARIOS[source]).read_text()
        base_dir = None
    else:
        path = Path(source)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read scenario {path}: {exc.strerror}") from None
        base_dir = path.parent
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed scenario: {exc}") from None
    return scenario_from_dict(doc, base_dir)
