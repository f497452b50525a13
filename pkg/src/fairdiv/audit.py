"""Externality (q-NNE) and monotonicity (p-MON) audits of a welfarist rule.

An audit solves the program twice, without and with the audited constraint
sets, and compares values: ``A`` before, ``B`` after.  For unconstrained
agents ``q = B / A``; for constrained agents ``p = A / B``.  Ratios are raw and
may exceed 1.
"""

from __future__ import annotations

import itertools
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from fairdiv.errors import DegenerateBaseline, NoEligibleAgents, ValidationError
from fairdiv.model import ConstraintSet, Instance, equal_split
from fairdiv.solver import DEFAULT_TOL, SolveReport, maximize_welfare
from fairdiv.welfare import WelfareRule

ZERO_TOL = 1e-12
ZERO_BASELINE = "ZERO_BASELINE"
LOW_VALUE = "LOW_VALUE"

SINGLE = "single"
PAIRS = "pairs"
MON = "mon"
MODES = (SINGLE, PAIRS, MON)


@dataclass
class AuditReport:
    rule: WelfareRule
    constrained_agents: tuple
    values_before: np.ndarray
    values_after: np.ndarray
    q_ratios: dict
    p_ratios: dict
    q_min: float
    p_min: float
    filtered_agents: list = field(default_factory=list)  # (agent, reason)
    gaps: tuple = (0.0, 0.0)


def worker_count(requested: Optional[int] = None) -> int:
    cap = os.environ.get("FAIRDIV_THREADS")
    n = requested or os.cpu_count() or 1
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)


def parallel_map(fn, items, workers: Optional[int] = None):
    """Ordered map over a process pool; runs inline with a single worker."""
    items = list(items)
    workers = min(worker_count(workers), len(items)) if items else 1
    if workers <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def compare(
    instance: Instance,
    rule: WelfareRule,
    constrained_agents: Sequence[int],
    before: SolveReport,
    after: SolveReport,
    filter_frac: float = 0.0,
) -> AuditReport:
    """Form the q/p ratios from two solves."""
    A, B = before.values, after.values
    cons = tuple(sorted(int(i) for i in constrained_agents))
    q, p, filtered = {}, {}, []
    others = [k for k in range(instance.n_agents) if k not in cons]
    if others and all(A[k] <= ZERO_TOL for k in others):
        raise DegenerateBaseline("every unconstrained agent has zero baseline value")
    for k in others:
        if A[k] <= ZERO_TOL:
            filtered.append((k, ZERO_BASELINE))
        elif filter_frac > 0 and instance.has_budgets and A[k] < filter_frac * instance.budgets[k]:
            filtered.append((k, LOW_VALUE))
        else:
            q[k] = float(B[k] / A[k])
    for i in cons:
        if B[i] > ZERO_TOL:
            p[i] = float(A[i] / B[i])
    return AuditReport(
        rule=rule,
        constrained_agents=cons,
        values_before=A,
        values_after=B,
        q_ratios=q,
        p_ratios=p,
        q_min=min(q.values()) if q else 1.0,
        p_min=min(p.values()) if p else 1.0,
        filtered_agents=filtered,
        gaps=(before.fw_gap, after.fw_gap),
    )


def audit(
    instance: Instance,
    rule: WelfareRule,
    constrained: Mapping[int, ConstraintSet],
    filter_frac: float = 0.0,
    base_constraints: Sequence[ConstraintSet] = (),
    tol: float = DEFAULT_TOL,
    engine: str = "auto",
    baseline: Optional[SolveReport] = None,
) -> AuditReport:
    """Audit the effect of imposing ``constrained`` (agent -> constraint set).

    ``base_constraints`` are present in both programs.  Agents whose baseline
    value is zero, or below ``filter_frac`` of their budget, are left out of
    ``q_min`` and listed in ``filtered_agents``.
    """
    if not constrained:
        raise ValidationError("audit needs at least one constrained agent")
    if not 0 <= filter_frac < 1:
        raise ValidationError(f"filter_frac must lie in [0, 1), got {filter_frac}")
    if baseline is None:
        baseline = maximize_welfare(instance, rule, base_constraints, tol=tol, engine=engine)
    extra = [cs for cs in constrained.values()]
    after = maximize_welfare(instance, rule, list(base_constraints) + extra, tol=tol, engine=engine)
    return compare(instance, rule, constrained.keys(), baseline, after, filter_frac)


@dataclass
class SweepResult:
    rule: WelfareRule
    mode: str
    value: float  # q_min for single/pairs, p_min for mon
    trials: list  # AuditReport per trial, in (agent) or (pair) order

    @property
    def metric(self) -> str:
        return "p_min" if self.mode == MON else "q_min"


def _trial(args):
    instance, rule, agents, filter_frac, tol, engine, baseline = args
    cons = {i: equal_split(instance, i) for i in agents}
    return audit(instance, rule, cons, filter_frac, tol=tol, engine=engine, baseline=baseline)


def eligible_agents(instance: Instance) -> list:
    return [i for i in range(instance.n_agents) if np.any(instance.values[i] > 0)]


def sweep(
    instance: Instance,
    rule: WelfareRule,
    mode: str = SINGLE,
    filter_frac: float = 0.0,
    tol: float = DEFAULT_TOL,
    engine: str = "auto",
    workers: Optional[int] = None,
) -> SweepResult:
    """Equal-split every eligible agent (single, mon) or pair of agents (pairs)."""
    if mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES}, got {mode!r}")
    if mode in (SINGLE, PAIRS) and instance.n_agents < 2:
        raise ValidationError("externality sweeps need at least two agents")
    elig = eligible_agents(instance)
    groups = [(i,) for i in elig] if mode != PAIRS else list(itertools.combinations(elig, 2))
    if not groups:
        raise NoEligibleAgents("no agent values any item positively")
    baseline = maximize_welfare(instance, rule, tol=tol, engine=engine)
    jobs = [(instance, rule, g, filter_frac, tol, engine, baseline) for g in groups]
    trials = parallel_map(_trial, jobs, workers)
    if mode == MON:
        value = min(t.p_min for t in trials)
    else:
        value = min(t.q_min for t in trials)
    return SweepResult(rule, mode, value, trials)
