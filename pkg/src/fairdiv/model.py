"""Allocation instances, per-agent linear constraints and budget-capped values."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from fairdiv.errors import (
    DimensionMismatch,
    IndexOutOfRange,
    NegativeValue,
    NoPositiveValueItems,
    NonPositiveBudget,
    SharesExceedOne,
    ValidationError,
    ZeroInfeasibleConstraint,
)

FEAS_TOL = 1e-9
SHARE_TOL = 1e-12

EQ = "eq"
LEQ = "leq"


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Instance:
    """n agents, m unit-supply items, value matrix ``values[i, j]`` and optional budgets."""

    values: np.ndarray
    budgets: Optional[np.ndarray] = None
    agent_labels: Optional[tuple] = None
    item_labels: Optional[tuple] = None

    @property
    def n_agents(self) -> int:
        return self.values.shape[0]

    @property
    def m_items(self) -> int:
        return self.values.shape[1]

    @property
    def has_budgets(self) -> bool:
        return self.budgets is not None


def build_instance(values, budgets=None, agent_labels=None, item_labels=None) -> Instance:
    try:
        v = np.array(values, dtype=float)
    except (TypeError, ValueError) as exc:
        raise DimensionMismatch(f"values are not a rectangular numeric matrix: {exc}") from None
    if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
        raise DimensionMismatch(f"values must be a non-empty n x m matrix, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise NegativeValue("values must be finite")
    if np.any(v < 0):
        raise NegativeValue("values must be nonnegative")
    b = None
    if budgets is not None:
        b = np.array(budgets, dtype=float).reshape(-1)
        if b.shape[0] != v.shape[0]:
            raise DimensionMismatch(f"{b.shape[0]} budgets for {v.shape[0]} agents")
        if not np.all(np.isfinite(b)) or np.any(b <= 0):
            raise NonPositiveBudget("budgets must be positive and finite")
        b = _frozen(b)
    if agent_labels is not None:
        agent_labels = tuple(str(s) for s in agent_labels)
        if len(agent_labels) != v.shape[0]:
            raise DimensionMismatch("agent_labels length differs from number of agents")
    if item_labels is not None:
        item_labels = tuple(str(s) for s in item_labels)
        if len(item_labels) != v.shape[1]:
            raise DimensionMismatch("item_labels length differs from number of items")
    return Instance(_frozen(v), b, agent_labels, item_labels)


@dataclass(frozen=True)
class LinearRelation:
    """``sum_j coeffs[j] * x[agent, j]  (relation)  rhs``."""

    agent: int
    coeffs: np.ndarray
    relation: str = EQ
    rhs: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _frozen(self.coeffs).reshape(-1))
        if self.relation not in (EQ, LEQ):
            raise ValidationError(f"relation must be 'eq' or 'leq', got {self.relation!r}")

    def zero_feasible(self) -> bool:
        if self.relation == EQ:
            return self.rhs == 0
        return self.rhs >= 0

    def residual(self, x_row) -> float:
        """Signed violation; <= 0 (LEQ) or == 0 (EQ) when satisfied."""
        return float(self.coeffs @ np.asarray(x_row, dtype=float) - self.rhs)

    def satisfied(self, x_row, tol=FEAS_TOL) -> bool:
        r = self.residual(x_row)
        return abs(r) <= tol if self.relation == EQ else r <= tol


@dataclass(frozen=True)
class ConstraintSet:
    """Intersection of linear relations on a single agent's allocation row."""

    relations: tuple = ()
    agent: Optional[int] = None

    def __post_init__(self):
        rels = tuple(self.relations)
        object.__setattr__(self, "relations", rels)
        agents = {r.agent for r in rels}
        if self.agent is not None:
            agents.add(self.agent)
        if len(agents) > 1:
            raise ValidationError(f"constraint set mixes agents {sorted(agents)}")
        if agents:
            object.__setattr__(self, "agent", agents.pop())
        for r in rels:
            if not r.zero_feasible():
                raise ZeroInfeasibleConstraint(
                    f"relation on agent {r.agent} excludes the zero allocation (rhs={r.rhs})"
                )

    def satisfied(self, x, tol=FEAS_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        return all(r.satisfied(x[r.agent], tol) for r in self.relations)


@dataclass(frozen=True)
class ProportionalitySpec:
    agent: int
    groups: tuple
    shares: tuple

    def __post_init__(self):
        groups = tuple(tuple(sorted(int(j) for j in g)) for g in self.groups)
        shares = tuple(float(a) for a in self.shares)
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "shares", shares)
        if len(groups) != len(shares):
            raise ValidationError("one share per group required")
        seen = set()
        for g in groups:
            if seen.intersection(g):
                raise ValidationError("proportionality groups must be disjoint")
            seen.update(g)
        if any(a < 0 for a in shares):
            raise ValidationError("shares must be nonnegative")
        if sum(shares) > 1 + SHARE_TOL:
            raise SharesExceedOne(f"shares sum to {sum(shares)} > 1")


def compile_proportionality(spec: ProportionalitySpec, m_items: int) -> ConstraintSet:
    """One EQ row per group: (1 - a) on the group's items, -a elsewhere, rhs 0."""
    rels = []
    for group, share in zip(spec.groups, spec.shares):
        if any(j < 0 or j >= m_items for j in group):
            raise IndexOutOfRange(f"group {group} out of range for {m_items} items")
        coeffs = np.full(m_items, -share)
        coeffs[list(group)] = 1.0 - share
        rels.append(LinearRelation(spec.agent, coeffs, EQ, 0.0))
    return ConstraintSet(tuple(rels), agent=spec.agent)


def equal_split_spec(instance: Instance, agent: int) -> ProportionalitySpec:
    """Equalize the agent's allocation across every item it values positively."""
    if not 0 <= agent < instance.n_agents:
        raise IndexOutOfRange(f"agent {agent} out of range")
    items = np.flatnonzero(instance.values[agent] > 0)
    if items.size == 0:
        raise NoPositiveValueItems(f"agent {agent} values no item positively")
    share = 1.0 / items.size
    return ProportionalitySpec(agent, tuple((int(j),) for j in items), (share,) * items.size)


def equal_split(instance: Instance, agent: int) -> ConstraintSet:
    return compile_proportionality(equal_split_spec(instance, agent), instance.m_items)


def linear_values(instance: Instance, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != instance.values.shape:
        raise DimensionMismatch(f"allocation shape {x.shape} != {instance.values.shape}")
    return np.einsum("ij,ij->i", instance.values, x)


def capped_values(instance: Instance, x) -> np.ndarray:
    """V_i = min(B_i, sum_j v_ij x_ij), or the plain linear value without budgets."""
    lin = linear_values(instance, x)
    if instance.budgets is None:
        return lin
    return np.minimum(instance.budgets, lin)


def is_feasible(instance: Instance, x, constraints: Sequence[ConstraintSet] = (), tol=FEAS_TOL) -> bool:
    x = np.asarray(x, dtype=float)
    if x.shape != instance.values.shape:
        return False
    if np.any(x < -tol) or np.any(x.sum(axis=0) > 1 + tol):
        return False
    return all(cs.satisfied(x, tol) for cs in constraints)


def check_constraints(instance: Instance, constraints: Sequence[ConstraintSet]) -> None:
    for cs in constraints:
        for r in cs.relations:
            if not 0 <= r.agent < instance.n_agents:
                raise IndexOutOfRange(f"constraint references agent {r.agent}")
            if r.coeffs.shape[0] != instance.m_items:
                raise DimensionMismatch(
                    f"relation has {r.coeffs.shape[0]} coefficients for {instance.m_items} items"
                )
