"""Linear programming over allocation regions.

A region holds the allocation variables ``x[i, j]`` (flattened row-major) and,
with budgets, one epigraph variable ``t[i]`` per agent so that
``t_i <= min(B_i, sum_j v_ij x_ij)`` is linear.  Every region contains the
zero vector, so all inequality right-hand sides are nonnegative and the slack
basis is a feasible start: the simplex below never needs a phase 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from fairdiv.errors import FairDivError, InfeasibleRegion, ZeroInfeasibleConstraint
from fairdiv.model import EQ, ConstraintSet, Instance, check_constraints

PIVOT_TOL = 1e-10
FEAS_TOL = 1e-9
# Dense Bland tableaus above this many cells go to HiGHS instead.
BLAND_MAX_CELLS = 400_000
MAX_PIVOTS = 200_000

OPTIMAL = "optimal"
UNBOUNDED = "unbounded"
INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class Region:
    """``A_ub z <= b_ub``, ``A_eq z = b_eq``, ``z >= 0``.

    ``labels[k]`` is ``("x", i, j)`` or ``("t", i)``; ``ub_kind`` tags each
    inequality as ``supply``, ``cap``, ``epigraph`` or ``agent``; ``eq_agent``
    records which agent owns each equality.
    """

    n_agents: int
    labels: tuple
    A_ub: sp.csr_matrix
    b_ub: np.ndarray
    ub_kind: tuple
    A_eq: sp.csr_matrix
    b_eq: np.ndarray
    eq_agent: tuple

    @property
    def num_vars(self) -> int:
        return len(self.labels)

    @property
    def rows(self):
        """Rows as ``(dense coeffs, relation, rhs)`` triples; small regions only."""
        out = [(self.A_ub[r].toarray().ravel(), "leq", float(self.b_ub[r])) for r in range(self.A_ub.shape[0])]
        out += [(self.A_eq[r].toarray().ravel(), "eq", float(self.b_eq[r])) for r in range(self.A_eq.shape[0])]
        return out

    def contains(self, z, tol=FEAS_TOL) -> bool:
        z = np.asarray(z, dtype=float)
        if np.any(z < -tol):
            return False
        if self.A_ub.shape[0] and np.any(self.A_ub @ z - self.b_ub > tol):
            return False
        if self.A_eq.shape[0] and np.any(np.abs(self.A_eq @ z - self.b_eq) > tol):
            return False
        return True

    def restrict(self, keep) -> "Region":
        """Drop the columns not in ``keep`` (fixing them at zero) and any rows left empty."""
        keep = np.asarray(keep, dtype=bool)
        cols = np.flatnonzero(keep)
        A_ub = self.A_ub[:, cols].tocsr()
        A_eq = self.A_eq[:, cols].tocsr()
        ub_rows = np.flatnonzero(np.diff(A_ub.indptr) > 0)
        eq_rows = np.flatnonzero(np.diff(A_eq.indptr) > 0)
        return Region(
            self.n_agents,
            tuple(self.labels[k] for k in cols),
            A_ub[ub_rows].tocsr(),
            self.b_ub[ub_rows],
            tuple(self.ub_kind[r] for r in ub_rows),
            A_eq[eq_rows].tocsr(),
            self.b_eq[eq_rows],
            tuple(self.eq_agent[r] for r in eq_rows),
        )


@dataclass(frozen=True)
class VertexSolution:
    point: Optional[np.ndarray]
    objective: float
    status: str
    pivots: int = 0


def assemble_region(instance: Instance, constraints: Sequence[ConstraintSet] = ()) -> Region:
    """Supply rows, per-agent constraint rows and (with budgets) epigraph rows."""
    check_constraints(instance, constraints)
    n, m = instance.n_agents, instance.m_items
    nx = n * m
    labels = [("x", i, j) for i in range(n) for j in range(m)]
    if instance.has_budgets:
        labels += [("t", i) for i in range(n)]

    ub_rows, ub_cols, ub_vals, b_ub, kinds = [], [], [], [], []
    eq_rows, eq_cols, eq_vals, eq_agent = [], [], [], []

    def add_ub(cols, vals, rhs, kind):
        r = len(b_ub)
        ub_rows.extend([r] * len(cols))
        ub_cols.extend(cols)
        ub_vals.extend(vals)
        b_ub.append(rhs)
        kinds.append(kind)

    for j in range(m):
        add_ub([i * m + j for i in range(n)], [1.0] * n, 1.0, "supply")
    if instance.has_budgets:
        for i in range(n):
            add_ub([nx + i], [1.0], float(instance.budgets[i]), "cap")
        for i in range(n):
            nz = np.flatnonzero(instance.values[i])
            add_ub([nx + i] + [i * m + j for j in nz], [1.0] + list(-instance.values[i, nz]), 0.0, "epigraph")
    for cs in constraints:
        for rel in cs.relations:
            if not rel.zero_feasible():
                raise ZeroInfeasibleConstraint(f"relation on agent {rel.agent} excludes zero")
            nz = np.flatnonzero(rel.coeffs)
            cols = [rel.agent * m + j for j in nz]
            vals = list(rel.coeffs[nz])
            if rel.relation == EQ:
                r = len(eq_agent)
                eq_rows.extend([r] * len(cols))
                eq_cols.extend(cols)
                eq_vals.extend(vals)
                eq_agent.append(rel.agent)
            else:
                add_ub(cols, vals, float(rel.rhs), "agent")

    nv = len(labels)
    A_ub = sp.csr_matrix((ub_vals, (ub_rows, ub_cols)), shape=(len(b_ub), nv))
    A_eq = sp.csr_matrix((eq_vals, (eq_rows, eq_cols)), shape=(len(eq_agent), nv))
    region = Region(
        n, tuple(labels), A_ub, np.array(b_ub, dtype=float), tuple(kinds),
        A_eq, np.zeros(len(eq_agent)), tuple(eq_agent),
    )
    assert region.contains(np.zeros(nv))
    return region


def forced_zero(region: Region) -> np.ndarray:
    """Mask of variables every feasible point sets to zero.

    Detected from rows ``a.z = 0`` (or ``a.z <= 0``) whose nonzero coefficients
    are all of one sign, including the per-agent sum of equality rows: for an
    exhaustive proportionality constraint that sum is ``-sum_{j not in groups}
    x_ij = 0``.  Repeats until no new variable is fixed.
    """
    nv = region.num_vars
    fixed = np.zeros(nv, dtype=bool)
    A_eq = region.A_eq.tocsr()
    # (row, one-sided, magnitude reference for the zero test)
    signed = [(A_eq[r], False, None) for r in range(A_eq.shape[0])]
    for agent in sorted(set(region.eq_agent)):
        rows = [r for r, a in enumerate(region.eq_agent) if a == agent]
        if len(rows) > 1:
            # cancellation leaves noise, so measure it against the summed rows
            ref = float(np.abs(A_eq[rows].data).max())
            signed.append((sp.csr_matrix(A_eq[rows].sum(axis=0)), False, ref))
    zero_rhs = np.flatnonzero(region.b_ub == 0)
    signed += [(region.A_ub[r], True, None) for r in zero_rhs]

    changed = True
    while changed:
        changed = False
        for row, one_sided, ref in signed:
            row = row.tocsr()
            idx, vals = row.indices, row.data.copy()
            if idx.size == 0:
                continue
            live = ~fixed[idx]
            if not live.any():
                continue
            scale = np.abs(vals).max() if ref is None else ref
            vals[np.abs(vals) <= 1e-12 * scale] = 0.0
            vals = np.where(live, vals, 0.0)
            nz = vals != 0
            if not nz.any():
                continue
            pos, neg = (vals > 0).any(), (vals < 0).any()
            # a.z <= 0 with a >= 0 forces zero; a.z = 0 with one sign forces zero
            if (one_sided and not neg) or (not one_sided and not (pos and neg)):
                newly = idx[nz & ~fixed[idx]]
                if newly.size:
                    fixed[newly] = True
                    changed = True
    return fixed


def sparsify_equalities(region: Region) -> Region:
    """Equivalent region with sparser equality rows.

    Within each agent's block, every row ``r`` is replaced by ``r - k p`` where
    ``p`` is the densest row and ``k`` the most common entrywise ratio.
    Proportionality rows share the dense ``-share * 1`` part, so this turns
    them into short differences.  The pivot row is kept, so the row space is
    unchanged.
    """
    if region.A_eq.shape[0] < 2:
        return region
    A = region.A_eq.tolil()
    for agent in sorted(set(region.eq_agent)):
        rows = [r for r, a in enumerate(region.eq_agent) if a == agent]
        if len(rows) < 2:
            continue
        sub = region.A_eq[rows]
        cols = np.unique(sub.indices)
        B = sub[:, cols].toarray()
        nnz = (B != 0).sum(axis=1)
        p = int(np.argmax(nnz))
        prow = B[p]
        for k, r in enumerate(rows):
            if k == p:
                continue
            both = (B[k] != 0) & (prow != 0)
            if not both.any():
                continue
            ratios = np.round(B[k, both] / prow[both], 12)
            vals, counts = np.unique(ratios, return_counts=True)
            kappa = vals[np.argmax(counts)]
            new = B[k] - kappa * prow
            new[np.abs(new) <= 1e-12 * max(np.abs(B[k]).max(), 1.0)] = 0.0
            if (new != 0).sum() < nnz[k]:
                dense = np.zeros(region.num_vars)
                dense[cols] = new
                nzc = np.flatnonzero(dense)
                A.rows[r] = list(nzc)
                A.data[r] = list(dense[nzc])
    return Region(
        region.n_agents, region.labels, region.A_ub, region.b_ub, region.ub_kind,
        A.tocsr(), region.b_eq, region.eq_agent,
    )


def _bland_maximize(c, A, b):
    """Dense tableau simplex, Bland's rule, for ``max c.z, A z <= b, z >= 0, b >= 0``."""
    r, nv = A.shape
    T = np.zeros((r + 1, nv + r + 1))
    T[:r, :nv] = A
    T[:r, nv:nv + r] = np.eye(r)
    T[:r, -1] = b
    T[r, :nv] = -c
    basis = np.arange(nv, nv + r)
    obj = T[r, :-1]
    pivots = 0
    while True:
        enter_cands = np.flatnonzero(obj < -PIVOT_TOL)
        if enter_cands.size == 0:
            break
        e = enter_cands[0]
        col = T[:r, e]
        rows = np.flatnonzero(col > PIVOT_TOL)
        if rows.size == 0:
            return None, np.inf, UNBOUNDED, pivots
        ratios = T[rows, -1] / col[rows]
        best = ratios.min()
        ties = rows[ratios <= best + PIVOT_TOL * max(1.0, abs(best))]
        leave = ties[np.argmin(basis[ties])]
        piv = T[leave] / T[leave, e]
        T -= np.outer(T[:, e], piv)
        T[leave] = piv
        basis[leave] = e
        pivots += 1
        if pivots > MAX_PIVOTS:
            raise FairDivError("simplex pivot limit exceeded")
    z = np.zeros(nv + r)
    z[basis] = T[:r, -1]
    point = np.maximum(z[:nv], 0.0)
    return point, float(c @ point), OPTIMAL, pivots


def _highs_maximize(c, region: Region):
    from scipy.optimize import linprog

    res = linprog(
        -c,
        A_ub=region.A_ub if region.A_ub.shape[0] else None,
        b_ub=region.b_ub if region.A_ub.shape[0] else None,
        A_eq=region.A_eq if region.A_eq.shape[0] else None,
        b_eq=region.b_eq if region.A_eq.shape[0] else None,
        bounds=(0, None),
        method="highs-ds",
    )
    if res.status == 2:
        return VertexSolution(None, -np.inf, INFEASIBLE)
    if res.status == 3:
        return VertexSolution(None, np.inf, UNBOUNDED)
    if res.status != 0:
        raise FairDivError(f"HiGHS failed: {res.message}")
    point = np.maximum(res.x, 0.0)
    return VertexSolution(point, float(c @ point), OPTIMAL)


def choose_engine(region: Region, engine: str = "auto") -> str:
    if engine != "auto":
        return engine
    rows = region.A_ub.shape[0] + 2 * region.A_eq.shape[0]
    return "bland" if rows * (rows + region.num_vars) <= BLAND_MAX_CELLS else "highs"


def lp_maximize(objective, region: Region, engine: str = "auto") -> VertexSolution:
    """Maximize ``objective . z`` over the region.

    ``engine`` is ``bland`` (dense tableau, Bland's anti-cycling rule),
    ``highs`` (scipy's dual simplex) or ``auto`` (Bland unless the tableau is
    large).  Both are deterministic for fixed input.
    """
    c = np.asarray(objective, dtype=float)
    if c.shape != (region.num_vars,):
        raise ValueError(f"objective has shape {c.shape}, region has {region.num_vars} vars")
    if np.any(region.b_ub < 0) or np.any(region.b_eq != 0):
        raise InfeasibleRegion("region does not contain the zero vector")
    if region.num_vars == 0:
        return VertexSolution(np.zeros(0), 0.0, OPTIMAL)
    if choose_engine(region, engine) == "highs":
        return _highs_maximize(c, region)
    A_eq = region.A_eq.toarray()
    A = np.vstack([region.A_ub.toarray(), A_eq, -A_eq])
    b = np.concatenate([region.b_ub, np.zeros(2 * A_eq.shape[0])])
    point, val, status, pivots = _bland_maximize(c, A, b)
    return VertexSolution(point, val, status, pivots)


def interior_point(region: Region, engine: str = "auto"):
    """Center-ish feasible point: maximize a common slack ``s``.

    Every allocation variable must be at least ``s / n_agents`` and every
    inequality with a positive right-hand side must keep slack ``s``.  Returns
    ``(point, s)``; ``s == 0`` flags that no strictly interior point of this
    form exists (the zero vector is returned then).
    """
    nv = region.num_vars
    if nv == 0:
        return np.zeros(0), 0.0
    is_x = np.array([lab[0] == "x" for lab in region.labels])
    pos = (region.b_ub > 0).astype(float)
    A_ub = sp.hstack([region.A_ub, sp.csr_matrix(pos.reshape(-1, 1))])
    nxv = int(is_x.sum())
    lower = sp.csr_matrix(
        (np.concatenate([-np.ones(nxv), np.full(nxv, 1.0 / region.n_agents)]),
         (np.concatenate([np.arange(nxv), np.arange(nxv)]),
          np.concatenate([np.flatnonzero(is_x), np.full(nxv, nv)]))),
        shape=(nxv, nv + 1),
    )
    cap = sp.csr_matrix(([1.0], ([0], [nv])), shape=(1, nv + 1))
    aux = Region(
        region.n_agents,
        region.labels + (("s",),),
        sp.vstack([A_ub, lower, cap]).tocsr(),
        np.concatenate([region.b_ub, np.zeros(nxv), [1.0]]),
        region.ub_kind + ("lower",) * nxv + ("cap",),
        sp.hstack([region.A_eq, sp.csr_matrix((region.A_eq.shape[0], 1))]).tocsr(),
        region.b_eq,
        region.eq_agent,
    )
    c = np.zeros(nv + 1)
    c[nv] = 1.0
    sol = lp_maximize(c, aux, engine)
    if sol.status != OPTIMAL or sol.objective <= FEAS_TOL:
        return np.zeros(nv), 0.0
    return sol.point[:nv], float(sol.point[nv])
