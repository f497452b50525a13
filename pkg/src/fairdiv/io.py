"""JSON instance files and the CSV report schemas.

Floats are written with ``repr`` so every CSV round-trips exactly and
repeated runs produce byte-identical files.
"""

from __future__ import annotations

import json
from typing import Iterable, Mapping, Sequence

import numpy as np

from fairdiv.errors import MalformedCSV, ValidationError
from fairdiv.model import ConstraintSet, Instance, LinearRelation, build_instance

REPORT_COLUMNS = (
    "trial_id", "constrained_agents", "agent", "role",
    "value_before", "value_after", "ratio", "kind",
)
SUMMARY_COLUMNS = ("rule", "mode", "metric", "value", "seed")
EXPERIMENT_COLUMNS = ("seed", "rule", "mode", "q_min", "one_minus_q_min", "p_min")

_TYPES = {
    "trial_id": int, "agent": int, "seed": int,
    "value_before": float, "value_after": float, "ratio": float, "value": float,
    "q_min": float, "one_minus_q_min": float, "p_min": float,
}


def instance_to_dict(instance: Instance, constraints: Sequence[ConstraintSet] = ()) -> dict:
    d = {
        "agents": instance.n_agents,
        "items": instance.m_items,
        "values": instance.values.tolist(),
    }
    if instance.budgets is not None:
        d["budgets"] = instance.budgets.tolist()
    if instance.agent_labels is not None:
        d["agent_labels"] = list(instance.agent_labels)
    if instance.item_labels is not None:
        d["item_labels"] = list(instance.item_labels)
    d["constraints"] = [
        {
            "agent": int(cs.agent),
            "relations": [
                {"coeffs": r.coeffs.tolist(), "rel": r.relation, "rhs": float(r.rhs)}
                for r in cs.relations
            ],
        }
        for cs in constraints
        if cs.agent is not None
    ]
    return d


def instance_from_dict(d: Mapping):
    """Return ``(instance, constraint sets)`` from the JSON instance schema."""
    try:
        values = d["values"]
        inst = build_instance(
            values, d.get("budgets"), d.get("agent_labels"), d.get("item_labels")
        )
        if "agents" in d and int(d["agents"]) != inst.n_agents:
            raise ValidationError(f"'agents' is {d['agents']} but values have {inst.n_agents} rows")
        if "items" in d and int(d["items"]) != inst.m_items:
            raise ValidationError(f"'items' is {d['items']} but values have {inst.m_items} columns")
        sets = []
        for c in d.get("constraints", []):
            agent = int(c["agent"])
            rels = tuple(
                LinearRelation(agent, r["coeffs"], r.get("rel", "eq"), float(r.get("rhs", 0.0)))
                for r in c["relations"]
            )
            sets.append(ConstraintSet(rels, agent=agent))
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed instance JSON: {exc!r}") from None
    return inst, sets


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def load_instance(path):
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from None
    return instance_from_dict(data)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(rows: Iterable[Mapping], columns: Sequence[str]) -> str:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(row.get(c)) for c in columns))
    return "\n".join(lines) + "\n"


def read_csv(text: str, columns: Sequence[str]) -> list:
    lines = text.rstrip("\n").split("\n")
    if not lines or tuple(lines[0].split(",")) != tuple(columns):
        raise MalformedCSV(f"expected header {','.join(columns)}")
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != len(columns):
            raise MalformedCSV(f"bad row {ln!r}")
        row = {}
        for c, p in zip(columns, parts):
            if p == "":
                row[c] = None
            else:
                row[c] = _TYPES.get(c, str)(p)
        rows.append(row)
    return rows


def audit_rows(trial_id: int, report) -> list:
    """Per-agent rows of one audit, in agent order."""
    cons = ";".join(str(i) for i in report.constrained_agents)
    filtered = dict(report.filtered_agents)
    rows = []
    for k in range(len(report.values_before)):
        a, b = float(report.values_before[k]), float(report.values_after[k])
        if k in report.constrained_agents:
            role, kind, ratio = "constrained", "p", report.p_ratios.get(k)
        elif k in filtered:
            role, kind, ratio = "filtered", "q", (b / a if a > 0 else None)
        else:
            role, kind, ratio = "other", "q", report.q_ratios.get(k)
        rows.append({
            "trial_id": trial_id, "constrained_agents": cons, "agent": k, "role": role,
            "value_before": a, "value_after": b, "ratio": ratio, "kind": kind,
        })
    return rows
