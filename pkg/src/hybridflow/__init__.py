"""Iterative provisioning and scheduling of looping workflows on hybrid clouds."""

from .cloud import InstanceType, Machine, PricingPolicy, ResourcePool, Venue, default_catalog
from .optimizer import IterationReport, ReplanThresholds, replan, run_iterations, update_profile
from .profile import RuntimeProfile
from .scenario import ScenarioConfig, load_scenario
from .scheduler import (
    Schedule,
    consolidate,
    downgrade_instances,
    estimate_runtime,
    greedy_min_makespan,
    objectives,
)
from .simulation import NoiseModel, account, execute
from .workflow import (
    TaskSpec,
    WorkflowGraph,
    builtin_dengue_workflow,
    iteration_instance,
    parse_workflow,
    render_workflow,
    topological_order,
)

__version__ = "0.1.0"
