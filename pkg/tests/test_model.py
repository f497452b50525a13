import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from fairdiv.errors import (
    DimensionMismatch,
    IndexOutOfRange,
    NegativeValue,
    NoPositiveValueItems,
    NonPositiveBudget,
    SharesExceedOne,
    ZeroInfeasibleConstraint,
)
from fairdiv.model import (
    EQ,
    LEQ,
    ConstraintSet,
    LinearRelation,
    ProportionalitySpec,
    build_instance,
    capped_values,
    compile_proportionality,
    equal_split_spec,
    is_feasible,
)


def test_build_instance_tight_pair_matrix():
    inst = build_instance([[1, 0], [1, 1]])
    assert (inst.n_agents, inst.m_items) == (2, 2)
    assert inst.budgets is None


def test_build_instance_zero_agent_is_legal():
    inst = build_instance([[0]])
    assert inst.n_agents == 1 and inst.values[0, 0] == 0


@pytest.mark.parametrize(
    "values, budgets, err",
    [
        ([[1, 2]], [-1], NonPositiveBudget),
        ([[1, 2]], [0.0], NonPositiveBudget),
        ([[1, -2]], None, NegativeValue),
        ([[1, 2], [3]], None, DimensionMismatch),
        ([[1, 2]], [1, 2], DimensionMismatch),
        ([[1, np.inf]], None, NegativeValue),
    ],
)
def test_build_instance_rejects(values, budgets, err):
    with pytest.raises(err):
        build_instance(values, budgets)


def test_instance_arrays_are_read_only():
    inst = build_instance([[1.0, 2.0]], [3.0])
    with pytest.raises(ValueError):
        inst.values[0, 0] = 5


def test_compile_proportionality_two_halves():
    cs = compile_proportionality(ProportionalitySpec(0, ((0,), (1,)), (0.5, 0.5)), 2)
    assert len(cs.relations) == 2
    np.testing.assert_allclose(cs.relations[0].coeffs, [0.5, -0.5])
    np.testing.assert_allclose(cs.relations[1].coeffs, [-0.5, 0.5])
    assert all(r.relation == EQ and r.rhs == 0 for r in cs.relations)


def test_compile_proportionality_forces_equal_mass_for_agent1():
    cs = compile_proportionality(ProportionalitySpec(1, ((1,),), (0.5,)), 2)
    x = np.array([[0.0, 0.0], [0.3, 0.3]])
    assert cs.satisfied(x)
    assert not cs.satisfied(np.array([[0.0, 0.0], [0.3, 0.4]]))


def test_shares_exceeding_one():
    with pytest.raises(SharesExceedOne):
        compile_proportionality(ProportionalitySpec(0, ((0,), (5,)), (0.9, 0.2)), 6)


def test_group_index_out_of_range():
    with pytest.raises(IndexOutOfRange):
        compile_proportionality(ProportionalitySpec(0, ((0,), (5,)), (0.5, 0.5)), 3)


def test_overlapping_groups_rejected():
    with pytest.raises(Exception):
        ProportionalitySpec(0, ((0, 1), (1,)), (0.5, 0.5))


def test_equal_split_spec_examples():
    inst = build_instance([[3, 0, 7], [1, 1, 1]])
    s = equal_split_spec(inst, 0)
    assert s.groups == ((0,), (2,)) and s.shares == (0.5, 0.5)
    s = equal_split_spec(build_instance([[1, 1, 1, 1]]), 0)
    assert len(s.groups) == 4 and all(a == 0.25 for a in s.shares)
    with pytest.raises(NoPositiveValueItems):
        equal_split_spec(build_instance([[0, 0]]), 0)


def test_zero_infeasible_relations():
    with pytest.raises(ZeroInfeasibleConstraint):
        ConstraintSet((LinearRelation(0, [1.0], EQ, 1.0),))
    with pytest.raises(ZeroInfeasibleConstraint):
        ConstraintSet((LinearRelation(0, [1.0], LEQ, -0.5),))


def test_mixed_agents_rejected():
    with pytest.raises(Exception):
        ConstraintSet((LinearRelation(0, [1.0], LEQ, 1.0), LinearRelation(1, [1.0], LEQ, 1.0)))


def test_capped_values_examples():
    np.testing.assert_allclose(capped_values(build_instance([[2]], [1]), [[1]]), [1])
    inst = build_instance([[1, 0], [1, 1]])
    np.testing.assert_allclose(capped_values(inst, [[1, 0], [0, 1]]), [1, 1])
    np.testing.assert_allclose(capped_values(inst, np.zeros((2, 2))), [0, 0])


def test_feasibility_slack():
    inst = build_instance([[1, 1], [1, 1]])
    assert is_feasible(inst, [[0.5, 0.0], [0.5 + 5e-10, 0.0]])
    assert not is_feasible(inst, [[0.5, 0.0], [0.5 + 1e-6, 0.0]])
    assert not is_feasible(inst, [[-1e-6, 0.0], [0.0, 0.0]])


# -- properties --------------------------------------------------------------

def _spec(draw, m):
    k = draw(st.integers(1, m))
    perm = draw(st.permutations(range(m)))
    sizes = draw(st.lists(st.integers(1, 2), min_size=k, max_size=k))
    groups, pos = [], 0
    for s in sizes:
        if pos >= m:
            break
        groups.append(tuple(perm[pos:pos + s]))
        pos += s
    w = draw(arrays(float, len(groups), elements=st.floats(0.01, 1.0)))
    total = draw(st.floats(0.1, 1.0))
    shares = tuple(float(a) for a in w / w.sum() * total)
    return ProportionalitySpec(0, tuple(groups), shares)


@st.composite
def specs(draw):
    m = draw(st.integers(1, 6))
    return m, _spec(draw, m)


@given(specs())
def test_compiled_relations_are_zero_feasible(ms):
    m, spec = ms
    cs = compile_proportionality(spec, m)
    assert all(r.zero_feasible for r in cs.relations)


@given(specs(), st.floats(0.01, 1.0))
def test_feasible_points_meet_group_shares(ms, scale):
    m, spec = ms
    # a point on the constraint: put share * mass on each group, rest outside
    x = np.zeros(m)
    for g, a in zip(spec.groups, spec.shares):
        x[list(g)] = a * scale / len(g)
    rest = [j for j in range(m) if not any(j in g for g in spec.groups)]
    leftover = scale * (1 - sum(spec.shares))
    if rest:
        x[rest] = leftover / len(rest)
    elif leftover > 1e-12:
        return
    cs = compile_proportionality(spec, m)
    X = x[None, :]
    assert cs.satisfied(X)
    for g, a in zip(spec.groups, spec.shares):
        assert abs(x[list(g)].sum() - a * x.sum()) <= 1e-9


value_mats = st.integers(1, 4).flatmap(
    lambda n: st.integers(1, 4).flatmap(
        lambda m: st.tuples(
            arrays(float, (n, m), elements=st.floats(0, 10)),
            arrays(float, n, elements=st.floats(0.1, 10)),
            arrays(float, (n, m), elements=st.floats(0, 1)),
            arrays(float, (n, m), elements=st.floats(0, 1)),
        )
    )
)


@given(value_mats)
def test_capped_values_monotone(data):
    v, B, x, y = data
    inst = build_instance(v, B)
    lo, hi = np.minimum(x, y), np.maximum(x, y)
    assert np.all(capped_values(inst, lo) <= capped_values(inst, hi) + 1e-12)


@given(value_mats)
def test_capped_values_midpoint_concave(data):
    v, B, x, y = data
    inst = build_instance(v, B)
    mid = capped_values(inst, (x + y) / 2)
    avg = (capped_values(inst, x) + capped_values(inst, y)) / 2
    assert np.all(mid >= avg - 1e-9)
