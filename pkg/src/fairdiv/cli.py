"""Command-line front end.

    fairdiv solve --rule nw --recipe thm3:eps=1
    fairdiv audit --rule gamma=0.5 --recipe thm1:alpha=10
    fairdiv sweep --rule sw --mode mon --recipe thm4:n=100,gamma=0.9,beta=0.2
    fairdiv experiment --reps 10 --out suite.csv
    fairdiv paper-check
    fairdiv ingest --kind counts --scale 0.01 counts.csv

Errors are written to stderr as one JSON object.  Exit codes: 2 bad input,
3 solver did not reach tolerance, 4 file I/O, 1 any other failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from fairdiv import checks
from fairdiv.audit import MODES, SINGLE, audit, sweep
from fairdiv.errors import FairDivError, ToleranceNotReached, ValidationError
from fairdiv.experiment import DEFAULT_RULES, run_experiment
from fairdiv.forge import (
    RANDOM_BUDGET,
    ingest_bid_log,
    ingest_category_counts,
    paper_instance,
    parse_recipe,
)
from fairdiv.io import (
    EXPERIMENT_COLUMNS,
    REPORT_COLUMNS,
    SUMMARY_COLUMNS,
    audit_rows,
    dumps_json,
    instance_to_dict,
    load_instance,
    write_csv,
)
from fairdiv.model import build_instance, equal_split
from fairdiv.solver import DEFAULT_TOL, maximize_welfare
from fairdiv.welfare import parse_rule

EXIT_OTHER, EXIT_VALIDATION, EXIT_SOLVER, EXIT_IO = 1, 2, 3, 4


def _add_source(p):
    src = p.add_argument_group("instance source (exactly one)")
    src.add_argument("--recipe", help="forge recipe, e.g. thm4:n=200,gamma=0.5")
    src.add_argument("--instance", help="instance JSON file")
    p.add_argument("--seed", type=int, default=None, help="seed for random recipes")


def _add_common(p):
    p.add_argument("--rule", required=True, help="sw, nw, mmf, snw, loglog, combo, gamma=<g>, exp=<l>")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--out", help="output path (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fairdiv", description="Welfarist fair division audits.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="maximize a welfare rule, print the SolveReport")
    _add_common(p)
    _add_source(p)
    p.add_argument("--format", choices=["json"], default="json")
    p.add_argument("--no-constraints", action="store_true", help="drop the source's constraint sets")
    p.add_argument("--max-iter", type=int, default=50_000)

    p = sub.add_parser("audit", help="externality/monotonicity audit of the source's constraints")
    _add_common(p)
    _add_source(p)
    p.add_argument("--equal-split", help="comma-separated agents to equal-split instead")
    p.add_argument("--filter", type=float, default=0.0, dest="filter_frac")
    p.add_argument("--format", choices=["csv", "json"], default="csv")

    p = sub.add_parser("sweep", help="equal-split sweep over agents or pairs")
    _add_common(p)
    _add_source(p)
    p.add_argument("--mode", choices=MODES, default=SINGLE)
    p.add_argument("--filter", type=float, default=0.0, dest="filter_frac")
    p.add_argument("--reps", type=int, default=1, help="seeds seed..seed+reps-1 (random recipes)")
    p.add_argument("--format", choices=["csv", "json"], default="csv")

    p = sub.add_parser("experiment", help="seeded synthetic suite, one row per seed and rule")
    p.add_argument("--rules", default=",".join(DEFAULT_RULES), help="';'- or ','-separated rules")
    p.add_argument("--mode", choices=MODES, default=SINGLE)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--filter", type=float, default=0.1, dest="filter_frac")
    p.add_argument("--agents", type=int, default=6)
    p.add_argument("--items", type=int, default=20)
    p.add_argument("--T", type=float, default=10.0, dest="T")
    p.add_argument("--sparsity", type=float, default=0.3)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--out")
    p.add_argument("--format", choices=["csv"], default="csv")

    p = sub.add_parser("paper-check", help="run the acceptance checks, print a pass/fail table")
    p.add_argument("--only", help="comma-separated check ids, e.g. C1,C3")
    p.add_argument("--out")

    p = sub.add_parser("ingest", help="CSV -> instance JSON")
    p.add_argument("path")
    p.add_argument("--kind", choices=["counts", "bids"], required=True)
    p.add_argument("--scale", type=float, default=1.0, help="value per count (counts)")
    p.add_argument("--max-items", type=int, default=20)
    p.add_argument("--max-agents", type=int, default=6)
    p.add_argument("--budget-T", type=float, default=None, dest="budget_T",
                   help="draw budgets T*(1-U) with U~Uniform[0,1)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--format", choices=["json"], default="json")
    return ap


def _source(args, seed=None):
    if bool(args.recipe) == bool(args.instance):
        raise ValidationError("give exactly one of --recipe and --instance")
    if args.instance:
        inst, sets = load_instance(args.instance)
        return inst, {cs.agent: cs for cs in sets}
    rec = parse_recipe(args.recipe)
    seed = seed if seed is not None else args.seed
    if seed is not None:
        rec = type(rec)(rec.kind, rec.params, seed)
    return paper_instance(rec)


def _emit(text: str, out):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _summary_path(out: str) -> str:
    p = Path(out)
    return str(p.with_name(p.stem + "_summary" + (p.suffix or ".csv")))


def _emit_pair(report_text: str, summary_text: str, out):
    if out:
        _emit(report_text, out)
        _emit(summary_text, _summary_path(out))
    else:
        sys.stdout.write(report_text + "\n" + summary_text)


def cmd_solve(args) -> int:
    inst, cons = _source(args)
    rule = parse_rule(args.rule)
    sets = [] if args.no_constraints else list(cons.values())
    rep = maximize_welfare(inst, rule, sets, tol=args.tol, max_iter=args.max_iter)
    _emit(dumps_json(rep.to_dict()), args.out)
    return 0


def _audit_summary(rule, mode, rep, seed):
    return [
        {"rule": rule.name, "mode": mode, "metric": "q_min", "value": rep.q_min, "seed": seed},
        {"rule": rule.name, "mode": mode, "metric": "p_min", "value": rep.p_min, "seed": seed},
    ]


def cmd_audit(args) -> int:
    inst, cons = _source(args)
    rule = parse_rule(args.rule)
    if args.equal_split:
        try:
            agents = [int(a) for a in args.equal_split.split(",")]
        except ValueError:
            raise ValidationError(f"--equal-split expects agent indices, got {args.equal_split!r}") from None
        cons = {i: equal_split(inst, i) for i in agents}
    if not cons:
        raise ValidationError("nothing to audit: the source has no constraints; use --equal-split")
    rep = audit(inst, rule, cons, args.filter_frac, tol=args.tol)
    if args.format == "json":
        d = {
            "rule": rule.name,
            "constrained_agents": list(rep.constrained_agents),
            "values_before": [float(v) for v in rep.values_before],
            "values_after": [float(v) for v in rep.values_after],
            "q_ratios": {str(k): v for k, v in rep.q_ratios.items()},
            "p_ratios": {str(k): v for k, v in rep.p_ratios.items()},
            "q_min": rep.q_min,
            "p_min": rep.p_min,
            "filtered_agents": [[int(a), r] for a, r in rep.filtered_agents],
        }
        _emit(dumps_json(d), args.out)
        return 0
    _emit_pair(
        write_csv(audit_rows(0, rep), REPORT_COLUMNS),
        write_csv(_audit_summary(rule, "audit", rep, args.seed), SUMMARY_COLUMNS),
        args.out,
    )
    return 0


def cmd_sweep(args) -> int:
    rule = parse_rule(args.rule)
    if args.reps < 1:
        raise ValidationError("--reps must be positive")
    base = args.seed if args.seed is not None else 0
    is_random = args.recipe and parse_recipe(args.recipe).kind == RANDOM_BUDGET
    seeds = [base + r for r in range(args.reps)] if is_random else [args.seed]
    report, summary, as_json = [], [], []
    trial_id = 0
    for seed in seeds:
        inst, _ = _source(args, seed)
        res = sweep(inst, rule, args.mode, args.filter_frac, tol=args.tol)
        for t in res.trials:
            report.extend(audit_rows(trial_id, t))
            trial_id += 1
        summary.append({"rule": rule.name, "mode": args.mode, "metric": res.metric, "value": res.value, "seed": seed})
        as_json.append({"seed": seed, "metric": res.metric, "value": res.value,
                        "trials": [{"constrained_agents": list(t.constrained_agents), "q_min": t.q_min,
                                    "p_min": t.p_min} for t in res.trials]})
    if args.format == "json":
        _emit(dumps_json({"rule": rule.name, "mode": args.mode, "runs": as_json}), args.out)
    else:
        _emit_pair(write_csv(report, REPORT_COLUMNS), write_csv(summary, SUMMARY_COLUMNS), args.out)
    return 0


def cmd_experiment(args) -> int:
    if args.reps < 1:
        raise ValidationError("--reps must be positive")
    rules = [r for r in args.rules.replace(";", ",").split(",") if r]
    for r in rules:
        parse_rule(r)
    rows = run_experiment(
        range(args.seed, args.seed + args.reps), rules, args.mode,
        n=args.agents, m=args.items, T=args.T, sparsity=args.sparsity,
        filter_frac=args.filter_frac, tol=args.tol,
    )
    _emit(write_csv(rows, EXPERIMENT_COLUMNS), args.out)
    return 0


def cmd_paper_check(args) -> int:
    keys = [k.strip().upper() for k in args.only.split(",")] if args.only else None
    if keys:
        unknown = [k for k in keys if k not in checks.CHECKS]
        if unknown:
            raise ValidationError(f"unknown check ids {unknown}")
    lines = []

    def show(res):
        lines.append(res.line())
        if not args.out:
            print(res.line(), flush=True)

    results = checks.run_all(keys, progress=show)
    n_pass = sum(r.passed for r in results)
    tail = f"{n_pass}/{len(results)} passed"
    if args.out:
        _emit("\n".join(lines + [tail]) + "\n", args.out)
    else:
        print(tail)
    return 0 if n_pass == len(results) else 1


def cmd_ingest(args) -> int:
    text = Path(args.path).read_text(encoding="utf-8")
    if args.kind == "counts":
        inst = ingest_category_counts(text, args.scale)
    else:
        inst = ingest_bid_log(text, args.max_items, args.max_agents)
    if args.budget_T is not None:
        if not args.budget_T > 0:
            raise ValidationError("--budget-T must be positive")
        rng = np.random.default_rng(args.seed)
        budgets = args.budget_T * (1.0 - rng.random(inst.n_agents))
        inst = build_instance(inst.values, budgets, inst.agent_labels, inst.item_labels)
    _emit(dumps_json(instance_to_dict(inst)), args.out)
    return 0


COMMANDS = {
    "solve": cmd_solve,
    "audit": cmd_audit,
    "sweep": cmd_sweep,
    "experiment": cmd_experiment,
    "paper-check": cmd_paper_check,
    "ingest": cmd_ingest,
}


def _fail(code: int, exc: BaseException) -> int:
    err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    sys.stderr.write(json.dumps(err) + "\n")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        return _fail(EXIT_VALIDATION, exc)
    except ToleranceNotReached as exc:
        return _fail(EXIT_SOLVER, exc)
    except OSError as exc:
        return _fail(EXIT_IO, exc)
    except FairDivError as exc:
        return _fail(EXIT_OTHER, exc)


if __name__ == "__main__":
    sys.exit(main())
