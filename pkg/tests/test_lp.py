import numpy as np
import pytest
from hypothesis import given, strategies as st

from fairdiv.errors import ZeroInfeasibleConstraint
from fairdiv.lp import (
    OPTIMAL,
    assemble_region,
    forced_zero,
    interior_point,
    lp_maximize,
    sparsify_equalities,
)
from fairdiv.model import (
    LEQ,
    ConstraintSet,
    LinearRelation,
    ProportionalitySpec,
    build_instance,
    compile_proportionality,
)


def _two_agent_region():
    inst = build_instance([[1, 0], [1, 1]])
    cs = compile_proportionality(ProportionalitySpec(1, ((1,),), (0.5,)), 2)
    return inst, assemble_region(inst, [cs])


def _supply_points(rng, n, m, k):
    # uniform over per-item simplices {x_.j >= 0, sum_i x_ij <= 1}
    d = rng.dirichlet(np.ones(n + 1), size=(k, m))
    return d[:, :, :n].transpose(0, 2, 1).reshape(k, n * m)


def test_plain_region_counts():
    reg = assemble_region(build_instance(np.ones((2, 2))))
    assert reg.num_vars == 4
    assert reg.A_ub.shape[0] == 2 and reg.A_eq.shape[0] == 0


def test_two_agent_region_counts():
    _, reg = _two_agent_region()
    assert reg.num_vars == 4
    assert reg.A_ub.shape[0] == 2 and reg.A_eq.shape[0] == 1


def test_budget_region_rows():
    reg = assemble_region(build_instance([[2.0]], [1.0]))
    assert reg.labels == (("x", 0, 0), ("t", 0))
    rows = sorted((tuple(c), rel, b) for c, rel, b in reg.rows)
    assert rows == sorted([((1.0, 0.0), "leq", 1.0), ((0.0, 1.0), "leq", 1.0), ((-2.0, 1.0), "leq", 0.0)])


def test_zero_infeasible_rejected_at_assembly():
    inst = build_instance([[1.0, 1.0]])
    bad = ConstraintSet.__new__(ConstraintSet)
    object.__setattr__(bad, "relations", (LinearRelation(0, [1.0, 0.0], LEQ, -1.0),))
    object.__setattr__(bad, "agent", 0)
    with pytest.raises(ZeroInfeasibleConstraint):
        assemble_region(inst, [bad])


def test_transportation_objective(rng):
    c = rng.normal(size=(3, 5))
    reg = assemble_region(build_instance(np.ones((3, 5))))
    sol = lp_maximize(c.ravel(), reg)
    assert sol.status == OPTIMAL
    assert sol.objective == pytest.approx(np.maximum(c.max(axis=0), 0).sum(), abs=1e-12)


def test_zero_objective():
    reg = assemble_region(build_instance(np.ones((2, 3))))
    sol = lp_maximize(np.zeros(6), reg)
    assert sol.objective == 0 and reg.contains(sol.point)


def test_tight_pair_vertex_respects_equality_and_beats_samples(rng):
    inst, reg = _two_agent_region()
    # gradient of ln V at the uniform point x = 1/4
    V = np.array([0.25, 0.5])
    c = (inst.values / V[:, None]).ravel()
    sol = lp_maximize(c, reg)
    assert reg.contains(sol.point)
    assert sol.point[2] == pytest.approx(sol.point[3], abs=1e-12)
    # feasible points: x10 = x11 = s, x00 in [0, 1 - s]
    s = rng.random(10_000)
    x00 = rng.random(10_000) * (1 - s)
    Z = np.stack([x00, np.zeros_like(s), s, s], axis=1)
    assert sol.objective >= (Z @ c).max() - 1e-12


def test_lp_beats_random_feasible_points(rng):
    for _ in range(5):
        n, m = rng.integers(2, 4), rng.integers(2, 5)
        inst = build_instance(rng.random((n, m)), rng.uniform(0.2, 1.5, n))
        reg = assemble_region(inst)
        c = rng.normal(size=reg.num_vars)
        sol = lp_maximize(c, reg)
        X = _supply_points(rng, n, m, 10_000)
        T = np.minimum(inst.budgets, np.einsum("kij,ij->ki", X.reshape(-1, n, m), inst.values))
        T *= rng.random(T.shape)
        Z = np.hstack([X, T])
        assert all(reg.contains(z) for z in Z[:20])
        assert sol.objective >= (Z @ c).max() - 1e-12


def test_bland_matches_highs_on_random_lps(rng):
    for _ in range(60):
        n, m = rng.integers(1, 4), rng.integers(1, 5)
        v = rng.random((n, m))
        B = rng.uniform(0.2, 2.0, n) if rng.random() < 0.5 else None
        inst = build_instance(v, B)
        cons = []
        if m >= 2 and rng.random() < 0.6:
            cons.append(compile_proportionality(ProportionalitySpec(0, ((0,), (1,)), (0.4, 0.4)), m))
        if rng.random() < 0.5:
            cons.append(ConstraintSet((LinearRelation(n - 1, rng.normal(size=m), LEQ, rng.random()),)))
        reg = assemble_region(inst, cons)
        c = rng.normal(size=reg.num_vars)
        a = lp_maximize(c, reg, engine="bland")
        b = lp_maximize(c, reg, engine="highs")
        assert a.objective == pytest.approx(b.objective, abs=1e-9)
        assert reg.contains(a.point)


def test_simplex_is_deterministic(rng):
    reg = assemble_region(build_instance(rng.random((4, 6)), rng.random(4) + 0.5))
    c = np.round(rng.normal(size=reg.num_vars), 1)  # ties on purpose
    a = lp_maximize(c, reg, engine="bland")
    b = lp_maximize(c, reg, engine="bland")
    assert np.array_equal(a.point, b.point) and a.pivots == b.pivots


def test_interior_point_plain():
    reg = assemble_region(build_instance(np.ones((2, 2))))
    z, s = interior_point(reg)
    np.testing.assert_allclose(z, 0.25, atol=1e-12)
    np.testing.assert_allclose(reg.b_ub - reg.A_ub @ z, 0.5, atol=1e-12)


def test_interior_point_with_equality():
    _, reg = _two_agent_region()
    z, _ = interior_point(reg)
    assert abs(z[2] - z[3]) <= 1e-9
    assert z.sum() > 0 and reg.contains(z)


def test_interior_point_one_by_one():
    reg = assemble_region(build_instance([[3.0]]))
    z, s = interior_point(reg)
    assert z[0] == pytest.approx(0.5) and s == pytest.approx(0.5)


def test_forced_zero_detects_pinned_variables():
    inst = build_instance([[1.0, 1.0, 1.0]])
    # x0 + x1 <= 0 pins both; x2 stays free
    cs = ConstraintSet((LinearRelation(0, [1.0, 1.0, 0.0], LEQ, 0.0),))
    fz = forced_zero(assemble_region(inst, [cs]))
    assert list(fz[:3]) == [True, True, False]


def test_sparsify_keeps_solution_set(rng):
    m = 6
    inst = build_instance(rng.random((2, m)))
    spec = ProportionalitySpec(0, tuple((j,) for j in range(m)), (1 / m,) * m)
    reg = assemble_region(inst, [compile_proportionality(spec, m)])
    sp_reg = sparsify_equalities(reg)
    assert sp_reg.A_eq.nnz < reg.A_eq.nnz
    for _ in range(10):
        c = rng.normal(size=reg.num_vars)
        assert lp_maximize(c, sp_reg).objective == pytest.approx(lp_maximize(c, reg).objective, abs=1e-10)


@given(st.integers(1, 3), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_interior_point_positive_mass(n, m, seed):
    rng = np.random.default_rng(seed)
    inst = build_instance(rng.random((n, m)))
    z, _ = interior_point(assemble_region(inst))
    assert z.sum() > 0 and np.all(z > 0)


def test_forced_zero_ignores_cancelled_equality_sum():
    # equal split over every item: the summed rows cancel to rounding noise
    inst = build_instance([[0.1, 1.10371964, 0.78559784], [0.67993998, 0.1934013, 0.80102894]])
    spec = ProportionalitySpec(0, ((0,), (1,), (2,)), (1 / 3, 1 / 3, 1 / 3))
    fz = forced_zero(assemble_region(inst, [compile_proportionality(spec, 3)]))
    assert not fz.any()
