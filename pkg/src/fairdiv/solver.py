"""Welfare maximization by away-step Frank-Wolfe over the allocation polytope.

The objective ``sum_i f(V_i)`` depends on the allocation only through the
value vector, so iterates are tracked both as convex combinations of LP
vertices (atoms) and as value vectors.  Steps toward or away from atoms that
are already in the active set do not need the LP ("lazy" steps); the LP is
called once those cheap steps stop making progress, and only an LP call can
declare convergence: the returned ``fw_gap`` is the Frank-Wolfe duality gap
``max_V grad f(V*) . (V - V*)`` evaluated at the returned allocation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from fairdiv.errors import InvalidTolerance, ToleranceNotReached
from fairdiv.lp import (
    OPTIMAL,
    Region,
    assemble_region,
    forced_zero,
    interior_point,
    lp_maximize,
    sparsify_equalities,
)
from fairdiv.model import ConstraintSet, Instance, capped_values
from fairdiv.welfare import WelfareRule

log = logging.getLogger(__name__)

VALUE_FLOOR = 1e-12
DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 50_000
_ATOM_EPS = 1e-14


@dataclass
class SolveReport:
    allocation: np.ndarray
    values: np.ndarray
    objective: float
    fw_gap: float
    iterations: int
    rule: WelfareRule
    active_agents: tuple
    converged: bool = True
    lp_calls: int = 0
    tol: float = DEFAULT_TOL

    def to_dict(self) -> dict:
        return {
            "rule": self.rule.name,
            "objective": float(self.objective),
            "fw_gap": float(self.fw_gap),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "active_agents": [int(i) for i in self.active_agents],
            "values": [float(v) for v in self.values],
            "allocation": [[float(v) for v in row] for row in self.allocation],
        }


@dataclass
class _Problem:
    instance: Instance
    rule: WelfareRule
    region: Region
    active: np.ndarray  # indices of agents in the objective
    M: sp.csr_matrix  # active agents' objective coordinate = M @ z
    x_cols: np.ndarray  # region column -> flat x index, -1 for t columns
    t_cols: np.ndarray = field(default=None)  # agent -> region column of t_i, -1 if absent

    def objective(self, u) -> float:
        return float(np.sum(self.rule.f(u)))

    def grad(self, u) -> np.ndarray:
        return self.rule.fprime(np.maximum(u, VALUE_FLOOR))

    def allocation(self, z) -> np.ndarray:
        n, m = self.instance.values.shape
        x = np.zeros(n * m)
        mask = self.x_cols >= 0
        x[self.x_cols[mask]] = z[mask]
        return np.clip(x.reshape(n, m), 0.0, 1.0)

    def point_from_allocation(self, x) -> np.ndarray:
        """Region coordinates of a full allocation, with t_i at its cap."""
        z = np.zeros(self.region.num_vars)
        mask = self.x_cols >= 0
        z[mask] = np.asarray(x, dtype=float).reshape(-1)[self.x_cols[mask]]
        if self.instance.has_budgets:
            V = capped_values(self.instance, x)
            has_t = self.t_cols >= 0
            z[self.t_cols[has_t]] = V[has_t]
        return z


def _prepare(instance: Instance, rule: WelfareRule, constraints: Sequence[ConstraintSet], engine="auto") -> _Problem:
    full = assemble_region(instance, constraints)
    n, m = instance.values.shape
    nx = n * m
    fixed = forced_zero(full)

    # columns touched by agent-specific rows
    touched = np.zeros(full.num_vars, dtype=bool)
    if full.A_eq.shape[0]:
        touched[full.A_eq.indices] = True
    agent_rows = [r for r, k in enumerate(full.ub_kind) if k == "agent"]
    if agent_rows:
        touched[full.A_ub[agent_rows].indices] = True

    vflat = instance.values.reshape(-1)
    keep = ~fixed
    keep[:nx] &= (vflat > 0) | touched[:nx]

    agents = np.arange(n)
    if rule.diverges_at_zero:
        positive = np.zeros(n, dtype=bool)
        kept_valued = keep[:nx].reshape(n, m) & (instance.values > 0)
        constrained = {int(a) for a in full.eq_agent}
        constrained |= {int(full.labels[c][1]) for c in (full.A_ub[agent_rows].indices if agent_rows else [])}
        trial = sparsify_equalities(full.restrict(keep))
        for i in range(n):
            if not kept_valued[i].any():
                continue
            if i not in constrained:
                positive[i] = True
                continue
            c = np.array([instance.values[i, lab[2]] if lab[0] == "x" and lab[1] == i else 0.0 for lab in trial.labels])
            sol = lp_maximize(c, trial, engine)
            positive[i] = sol.status == OPTIMAL and sol.objective > 1e-12
        agents = np.flatnonzero(positive)
        dead = np.ones(n, dtype=bool)
        dead[agents] = False
        for k, lab in enumerate(full.labels):
            if dead[lab[1]]:
                keep[k] = False

    region = sparsify_equalities(full.restrict(keep))
    cols = np.flatnonzero(keep)
    x_cols = np.where(cols < nx, cols, -1)
    t_cols = np.full(n, -1)
    pos = {i: k for k, i in enumerate(agents)}
    rows, mcols, vals = [], [], []
    for k, lab in enumerate(region.labels):
        i = lab[1]
        if i not in pos:
            continue
        if lab[0] == "t":
            t_cols[i] = k
            rows.append(pos[i]); mcols.append(k); vals.append(1.0)
        elif not instance.has_budgets:
            rows.append(pos[i]); mcols.append(k); vals.append(instance.values[i, lab[2]])
    M = sp.csr_matrix((vals, (rows, mcols)), shape=(len(agents), region.num_vars))
    return _Problem(instance, rule, region, agents, M, x_cols, t_cols)


def _line_search(rule: WelfareRule, u, du, tmax, rounds=8, grid=32) -> float:
    """Maximize the concave ``tau -> sum f(u + tau du)`` on ``[0, tmax]``.

    Bracketing on the sign of the derivative, ``grid`` subintervals per round.
    """
    live = du != 0
    if not live.any() or tmax <= 0:
        return 0.0
    u, du = u[live], du[live]

    def dphi(taus):
        pts = np.maximum(u[None, :] + np.outer(taus, du), 0.0)
        with np.errstate(invalid="ignore"):
            d = np.sum(rule.fprime(pts) * du[None, :], axis=1)
        return np.where(np.isnan(d), -np.inf, d)

    ends = dphi(np.array([0.0, tmax]))
    if ends[1] >= 0:
        return float(tmax)
    if ends[0] <= 0:
        return 0.0
    lo, hi = 0.0, float(tmax)
    for _ in range(rounds):
        taus = np.linspace(lo, hi, grid + 1)
        d = dphi(taus[1:-1])
        neg = np.flatnonzero(d < 0)
        k = neg[0] + 1 if neg.size else grid
        lo, hi = taus[k - 1], taus[k]
    return 0.5 * (lo + hi)


def _start_point(prob: _Problem, engine):
    region = prob.region
    z, s = interior_point(region, engine)
    if prob.instance.has_budgets and s > 0:
        z = prob.point_from_allocation(prob.allocation(z))
    u = prob.M @ z
    if s > 0 and (not prob.rule.diverges_at_zero or np.all(u > 0)):
        return z
    # fall back to the centroid of each active agent's best vertex
    pts = []
    for r in range(prob.M.shape[0]):
        sol = lp_maximize(prob.M[r].toarray().ravel(), region, engine)
        pts.append(sol.point)
    if not pts:
        return np.zeros(region.num_vars)
    return np.mean(pts, axis=0)


def maximize_welfare(
    instance: Instance,
    rule: WelfareRule,
    constraints: Sequence[ConstraintSet] = (),
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    engine: str = "auto",
    raise_on_fail: bool = True,
) -> SolveReport:
    """Maximize ``sum_i f(V_i)`` over allocations satisfying ``constraints``.

    Convergence means ``fw_gap <= tol * (|objective| + 1)``.  Agents that can
    reach no positive value are left out of the objective when ``f(0) = -inf``.
    """
    if not (tol > 0 and np.isfinite(tol)):
        raise InvalidTolerance(f"tol must be positive, got {tol}")
    prob = _prepare(instance, rule, constraints, engine)
    region = prob.region
    M = prob.M
    MT = M.T.tocsr()

    z0 = _start_point(prob, engine)
    X = [z0]
    U = [M @ z0]
    w = [1.0]
    u = U[0].copy()
    phi = np.inf
    gap = np.inf
    lp_calls = 0
    it = 0
    converged = False

    while it < max_iter:
        it += 1
        g = prob.grad(u)
        Ua = np.asarray(U)
        scores = Ua @ g
        here = float(g @ u)
        live = np.flatnonzero(np.asarray(w) > 0)
        a = live[np.argmin(scores[live])]
        away_gap = here - scores[a]
        s_loc = int(np.argmax(scores))
        loc_gap = scores[s_loc] - here

        if max(loc_gap, away_gap) > phi:
            if loc_gap >= away_gap:
                s_idx, fw = s_loc, True
            else:
                fw = False
        else:
            c = MT @ g
            sol = lp_maximize(c, region, engine)
            lp_calls += 1
            gap = max(float(sol.objective) - here, 0.0)
            F = prob.objective(u)
            if gap <= tol * (abs(F) + 1.0):
                converged = True
                break
            phi = max(gap, away_gap) / 2.0
            if gap >= away_gap:
                v = sol.point
                dup = np.flatnonzero(np.max(np.abs(np.asarray(X) - v), axis=1) <= 1e-12)
                if dup.size:
                    s_idx = int(dup[0])
                else:
                    X.append(v)
                    U.append(M @ v)
                    w.append(0.0)
                    s_idx = len(X) - 1
                fw = True
            else:
                fw = False

        if fw:
            du = U[s_idx] - u
            tau = _line_search(rule, u, du, 1.0)
            if tau <= 0:
                phi = min(phi, loc_gap / 2.0) if np.isfinite(phi) else phi
                continue
            w = [wi * (1.0 - tau) for wi in w]
            w[s_idx] += tau
            u = u + tau * du
        else:
            wa = w[a]
            tmax = wa / (1.0 - wa) if wa < 1.0 else np.inf
            du = u - U[a]
            tau = _line_search(rule, u, du, tmax)
            if tau <= 0:
                phi = away_gap / 2.0
                continue
            w = [wi * (1.0 + tau) for wi in w]
            if tau >= tmax:
                w[a] = 0.0
            else:
                w[a] -= tau
            u = u + tau * du

        # drop dead atoms and renormalize
        keep = [k for k, wi in enumerate(w) if wi > _ATOM_EPS]
        if len(keep) < len(w):
            X = [X[k] for k in keep]
            U = [U[k] for k in keep]
            w = [w[k] for k in keep]
            tot = sum(w)
            w = [wi / tot for wi in w]
            u = np.asarray(w) @ np.asarray(U)

    z = np.asarray(w) @ np.asarray(X)
    x = prob.allocation(z)
    report = _report(prob, x, it, converged, lp_calls, tol, engine)
    if not converged and raise_on_fail:
        raise ToleranceNotReached(
            f"{rule.name}: gap {gap:.3g} above tolerance after {it} iterations", report
        )
    return report


def _gap_at(prob: _Problem, x, engine="auto"):
    z = prob.point_from_allocation(x)
    u = prob.M @ z
    g = prob.grad(u)
    sol = lp_maximize(prob.M.T @ g, prob.region, engine)
    return max(float(sol.objective - g @ u), 0.0), u


def _report(prob: _Problem, x, iterations, converged, lp_calls, tol, engine) -> SolveReport:
    V = capped_values(prob.instance, x)
    gap, u = _gap_at(prob, x, engine)
    obj = prob.objective(V[prob.active]) if prob.active.size else 0.0
    return SolveReport(
        allocation=x,
        values=V,
        objective=obj,
        fw_gap=gap,
        iterations=iterations,
        rule=prob.rule,
        active_agents=tuple(int(i) for i in prob.active),
        converged=converged,
        lp_calls=lp_calls,
        tol=tol,
    )


def fw_gap(instance: Instance, rule: WelfareRule, constraints: Sequence[ConstraintSet], allocation, engine="auto") -> float:
    """Frank-Wolfe gap of ``allocation``, recomputed from scratch."""
    prob = _prepare(instance, rule, constraints, engine)
    return _gap_at(prob, allocation, engine)[0]
