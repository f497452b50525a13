import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fairdiv.errors import ToleranceNotReached
from fairdiv.forge import ForgeRecipe, paper_instance
from fairdiv.model import build_instance, capped_values, equal_split, is_feasible
from fairdiv.oracle import brute_force_oracle
from fairdiv.solver import fw_gap, maximize_welfare
from fairdiv.welfare import parse_rule

NW = parse_rule("nw")
RULES = [parse_rule(s) for s in ("sw", "nw", "gamma=0.5", "gamma=-1")]


def test_tight_pair_unconstrained():
    inst = build_instance([[1, 0], [1, 1]])
    rep = maximize_welfare(inst, NW)
    np.testing.assert_allclose(rep.values, [1, 1], atol=1e-6)
    np.testing.assert_allclose(rep.allocation, [[1, 0], [0, 1]], atol=1e-6)


def test_tight_pair_constrained_half():
    inst, cons = paper_instance(ForgeRecipe("thm3", {"eps": 1.0}))
    rep = maximize_welfare(inst, NW, list(cons.values()))
    assert rep.allocation[1, 0] == pytest.approx(0.5, abs=1e-4)
    assert rep.allocation[1, 1] == pytest.approx(0.5, abs=1e-4)
    np.testing.assert_allclose(rep.values, [0.5, 1.0], atol=1e-4)
    assert rep.objective == pytest.approx(brute_force_oracle(inst, NW, list(cons.values())), abs=1e-3)


def test_blowup_social_takes_everything():
    inst, cons = paper_instance(ForgeRecipe("thm1", {"alpha": 2.0, "beta": 1.0}))
    rep = maximize_welfare(inst, parse_rule("sw"), list(cons.values()))
    np.testing.assert_allclose(rep.values, [2, 0], atol=1e-6)
    assert rep.values[1] <= 1e-6


def test_zero_value_agent_is_excluded_from_nash():
    inst = build_instance([[0.0, 0.0], [1.0, 2.0]])
    rep = maximize_welfare(inst, NW)
    assert rep.active_agents == (1,)
    np.testing.assert_allclose(rep.values, [0, 3], atol=1e-9)


def test_report_json_keys():
    rep = maximize_welfare(build_instance([[1.0, 2.0]]), NW)
    d = json.loads(json.dumps(rep.to_dict()))
    assert {"objective", "fw_gap", "iterations", "values", "allocation"} <= set(d)


def test_social_matches_gamma_one(rng):
    for _ in range(5):
        inst = build_instance(rng.random((3, 4)))
        a = maximize_welfare(inst, parse_rule("sw"))
        b = maximize_welfare(inst, parse_rule("gamma=1"))
        np.testing.assert_allclose(a.allocation, b.allocation, atol=1e-9)


def test_budget_caps_respected(rng):
    inst = build_instance(rng.random((3, 5)) * 4, [0.3, 0.5, 10.0])
    rep = maximize_welfare(inst, NW)
    assert np.all(rep.values <= inst.budgets + 1e-9)
    np.testing.assert_allclose(rep.values, capped_values(inst, rep.allocation))


def test_iteration_cap_raises():
    rng = np.random.default_rng(0)
    inst = build_instance(rng.random((5, 8)))
    with pytest.raises(ToleranceNotReached) as info:
        maximize_welfare(inst, parse_rule("gamma=-1"), tol=1e-14, max_iter=3)
    assert info.value.report is not None


def test_no_raise_returns_unconverged_report():
    rng = np.random.default_rng(0)
    inst = build_instance(rng.random((5, 8)))
    rep = maximize_welfare(inst, parse_rule("gamma=-1"), tol=1e-14, max_iter=3, raise_on_fail=False)
    assert not rep.converged


def test_oracle_dominance_small(rng):
    for _ in range(8):
        inst = build_instance(rng.uniform(0.05, 1, (2, 2)))
        for rule in RULES:
            cons = [equal_split(inst, 0)]
            rep = maximize_welfare(inst, rule, cons)
            assert rep.objective >= brute_force_oracle(inst, rule, cons) - 1e-3


# -- properties --------------------------------------------------------------

@st.composite
def small_problems(draw):
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    n, m = int(rng.integers(2, 4)), int(rng.integers(2, 5))
    v = rng.lognormal(0, 1, (n, m)) * (rng.random((n, m)) > 0.2)
    v[:, 0] += 0.1
    B = rng.uniform(0.3, 3, n) if draw(st.booleans()) else None
    inst = build_instance(v, B)
    cons = [equal_split(inst, int(rng.integers(n)))] if draw(st.booleans()) else []
    return inst, cons, draw(st.sampled_from(RULES))


@settings(max_examples=25)
@given(small_problems())
def test_feasible_and_certified(prob):
    inst, cons, rule = prob
    rep = maximize_welfare(inst, rule, cons)
    assert is_feasible(inst, rep.allocation, cons)
    assert fw_gap(inst, rule, cons, rep.allocation) <= rep.tol * (abs(rep.objective) + 1)
    np.testing.assert_allclose(rep.values, capped_values(inst, rep.allocation), atol=1e-12)


@settings(max_examples=15)
@given(small_problems())
def test_constraint_shrinkage(prob):
    inst, cons, rule = prob
    if not cons:
        return
    a = maximize_welfare(inst, rule)
    b = maximize_welfare(inst, rule, cons)
    assert b.objective <= a.objective + 1e-6


@settings(max_examples=15)
@given(small_problems())
def test_deterministic(prob):
    inst, cons, rule = prob
    a = maximize_welfare(inst, rule, cons).to_dict()
    b = maximize_welfare(inst, rule, cons).to_dict()
    assert json.dumps(a) == json.dumps(b)


@settings(max_examples=15)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0.1, 10.0]))
def test_nash_scale_invariance(seed, alpha):
    rng = np.random.default_rng(seed)
    n, m = int(rng.integers(2, 4)), int(rng.integers(2, 5))
    v = rng.uniform(0.05, 1.0, (n, m))
    k = int(rng.integers(n))
    w = v.copy()
    w[k] *= alpha
    a = maximize_welfare(build_instance(v), NW)
    b = maximize_welfare(build_instance(w), NW)
    assert np.max(np.abs(a.allocation - b.allocation)) <= 1e-4


@settings(max_examples=15)
@given(st.integers(0, 2**32 - 1))
def test_nash_proportional(seed):
    rng = np.random.default_rng(seed)
    n, m = int(rng.integers(2, 5)), int(rng.integers(1, 6))
    v = rng.uniform(0.0, 1.0, (n, m))
    rep = maximize_welfare(build_instance(v), NW)
    assert np.all(rep.values >= v.sum(axis=1) / n - 1e-6)
