"""Brute-force grid oracle for tiny instances.

Independent of the LP and Frank-Wolfe code: equality relations are eliminated
by Gaussian elimination, the remaining free allocation variables are gridded
over [0, 1], and every grid point is checked for feasibility and scored.  The
best point is then refined by repeatedly re-gridding a shrinking window
around it.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from fairdiv.errors import TooLargeForOracle
from fairdiv.model import EQ, ConstraintSet, Instance, check_constraints
from fairdiv.welfare import WelfareRule

MAX_FREE = 6
TOL = 1e-9


def _eliminate(E: np.ndarray):
    """Return (pivot columns, free columns, R) with x[piv] = R @ x[free] solving E x = 0."""
    E = E.copy()
    k, N = E.shape
    piv, row = [], 0
    for col in range(N):
        if row >= k:
            break
        r = row + int(np.argmax(np.abs(E[row:, col])))
        if abs(E[r, col]) <= 1e-12:
            continue
        E[[row, r]] = E[[r, row]]
        E[row] /= E[row, col]
        for rr in range(k):
            if rr != row and E[rr, col] != 0:
                E[rr] -= E[rr, col] * E[row]
        piv.append(col)
        row += 1
    free = [c for c in range(N) if c not in piv]
    R = -E[: len(piv)][:, free]
    return piv, free, R


class _Grid:
    def __init__(self, instance, rule, constraints):
        n, m = instance.values.shape
        self.instance, self.rule = instance, rule
        N = n * m
        eq, leq = [], []
        for cs in constraints:
            for rel in cs.relations:
                row = np.zeros(N)
                row[rel.agent * m:(rel.agent + 1) * m] = rel.coeffs
                (eq if rel.relation == EQ else leq).append((row, rel.rhs))
        E = np.array([r for r, _ in eq]).reshape(len(eq), N)
        self.piv, self.free, self.R = _eliminate(E) if eq else ([], list(range(N)), np.zeros((0, N)))
        self.L = np.array([r for r, _ in leq]).reshape(len(leq), N)
        self.l_rhs = np.array([b for _, b in leq])
        self.N, self.n, self.m = N, n, m
        self.active = None

    @property
    def dim(self):
        return len(self.free)

    def full(self, F):
        X = np.zeros((F.shape[0], self.N))
        X[:, self.free] = F
        if self.piv:
            X[:, self.piv] = F @ self.R.T
        return X

    def score(self, F):
        """Objective per row of free-variable points; -inf where infeasible."""
        X = self.full(F)
        ok = np.all(X >= -TOL, axis=1) & np.all(X <= 1 + TOL, axis=1)
        ok &= np.all(X.reshape(-1, self.n, self.m).sum(axis=1) <= 1 + TOL, axis=1)
        if self.L.shape[0]:
            ok &= np.all(X @ self.L.T <= self.l_rhs + TOL, axis=1)
        Xc = np.clip(X, 0.0, 1.0).reshape(-1, self.n, self.m)
        V = np.einsum("kij,ij->ki", Xc, self.instance.values)
        if self.instance.budgets is not None:
            V = np.minimum(V, self.instance.budgets)
        if self.active is None:
            best = np.where(ok[:, None], V, 0.0).max(axis=0) if ok.any() else np.zeros(self.n)
            if self.rule.diverges_at_zero:
                self.active = np.flatnonzero(best > 1e-12)
            else:
                self.active = np.arange(self.n)
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = self.rule.f(V[:, self.active]).sum(axis=1) if self.active.size else np.zeros(len(V))
        vals = np.where(np.isnan(vals), -np.inf, vals)
        return np.where(ok, vals, -np.inf)


def _mesh(lo, hi, K):
    axes = [np.linspace(a, b, K) for a, b in zip(lo, hi)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(lo))


def brute_force_oracle(
    instance: Instance,
    rule: WelfareRule,
    constraints: Sequence[ConstraintSet] = (),
    grid_steps: int = 1000,
    coarse_points: int = 60_000,
    refine_points: int = 6_561,
) -> float:
    """Best objective found on a grid over feasible allocations.

    The coarse grid uses at most ``grid_steps`` steps per free dimension
    (fewer if that would exceed ``coarse_points``); refinement stops once the
    window step falls below ``1e-3 / grid_steps``.
    """
    check_constraints(instance, constraints)
    grid = _Grid(instance, rule, constraints)
    d = grid.dim
    if d > MAX_FREE:
        raise TooLargeForOracle(f"{d} free dimensions > {MAX_FREE}")
    if d == 0:
        return float(grid.score(np.zeros((1, 0)))[0])

    # find the active set on a coarse pass first so that scores are comparable
    G = max(2, min(grid_steps, int(coarse_points ** (1.0 / d)) - 1))
    pts = _mesh(np.zeros(d), np.ones(d), G + 1)
    scores = grid.score(pts)
    k = int(np.argmax(scores))
    best, best_val = pts[k], scores[k]
    step = 1.0 / G
    K = max(5, int(refine_points ** (1.0 / d)))
    K += (K + 1) % 2  # odd, so the center is on the grid
    target = 1e-3 / grid_steps
    for _ in range(200):
        if step <= target:
            break
        lo = np.clip(best - 2 * step, 0.0, 1.0)
        hi = np.clip(best + 2 * step, 0.0, 1.0)
        pts = np.vstack([best[None, :], _mesh(lo, hi, K)])
        scores = grid.score(pts)
        k = int(np.argmax(scores))
        if scores[k] > best_val:
            best, best_val = pts[k], scores[k]
        step = 4 * step / (K - 1)
    return float(best_val)
