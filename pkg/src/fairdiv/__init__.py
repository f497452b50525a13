"""Welfarist allocation of divisible items under agent-side linear constraints."""

from fairdiv.audit import AuditReport, SweepResult, audit, sweep
from fairdiv.errors import FairDivError, ToleranceNotReached, ValidationError
from fairdiv.forge import (
    ForgeRecipe,
    ingest_bid_log,
    ingest_category_counts,
    paper_instance,
    parse_recipe,
    random_budget_instance,
)
from fairdiv.model import (
    ConstraintSet,
    Instance,
    LinearRelation,
    ProportionalitySpec,
    build_instance,
    compile_proportionality,
    equal_split,
    equal_split_spec,
)
from fairdiv.oracle import brute_force_oracle
from fairdiv.solver import SolveReport, fw_gap, maximize_welfare
from fairdiv.welfare import WelfareRule, delta_of, parse_rule, pmon_bound

__version__ = "0.1.0"

__all__ = [
    "AuditReport", "ConstraintSet", "FairDivError", "ForgeRecipe", "Instance",
    "LinearRelation", "ProportionalitySpec", "SolveReport", "SweepResult",
    "ToleranceNotReached", "ValidationError", "WelfareRule", "audit",
    "brute_force_oracle", "build_instance", "compile_proportionality", "delta_of",
    "equal_split", "equal_split_spec", "fw_gap", "ingest_bid_log",
    "ingest_category_counts", "maximize_welfare", "paper_instance", "parse_recipe",
    "parse_rule", "pmon_bound", "random_budget_instance", "sweep",
]
