"""Seeded externality/monotonicity experiments on synthetic budget-capped instances."""

from __future__ import annotations

from typing import Optional, Sequence

from fairdiv.audit import MON, PAIRS, SINGLE, parallel_map, sweep
from fairdiv.forge import random_budget_instance
from fairdiv.welfare import parse_rule

DEFAULT_RULES = ("sw", "gamma=0.5", "gamma=0.1", "nw", "gamma=-1")


def _one(args):
    seed, rule_text, mode, n, m, T, dist, sparsity, filter_frac, tol = args
    inst = random_budget_instance(n, m, T, seed, dist, sparsity)
    rule = parse_rule(rule_text)
    res = sweep(inst, rule, SINGLE if mode == MON else mode, filter_frac, tol=tol, workers=1)
    q = res.value
    # the monotonicity ratios come from the same single-agent trials
    p = min(t.p_min for t in res.trials) if mode != PAIRS else None
    return {
        "seed": seed,
        "rule": rule.name,
        "mode": mode,
        "q_min": q,
        "one_minus_q_min": 1.0 - q,
        "p_min": p,
    }


def run_experiment(
    seeds: Sequence[int] = range(10),
    rules: Sequence[str] = DEFAULT_RULES,
    mode: str = SINGLE,
    n: int = 6,
    m: int = 20,
    T: float = 10.0,
    dist=("lognormal", 0.0, 1.0),
    sparsity: float = 0.3,
    filter_frac: float = 0.1,
    tol: float = 1e-6,
    workers: Optional[int] = None,
) -> list:
    """One row per (seed, rule): q_min, 1 - q_min and p_min of the equal-split sweep."""
    jobs = [
        (int(s), r, mode, n, m, T, tuple(dist), sparsity, filter_frac, tol)
        for s in seeds
        for r in rules
    ]
    return parallel_map(_one, jobs, workers)
