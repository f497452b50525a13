"""Instance generators: worst-case constructions, seeded random instances, CSV ingestion."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from fairdiv.errors import BadParams, MalformedCSV, NegativeBid, NegativeCount
from fairdiv.model import (
    EQ,
    ConstraintSet,
    Instance,
    LinearRelation,
    ProportionalitySpec,
    build_instance,
    compile_proportionality,
)

THM1 = "thm1"
THM3 = "thm3"
COR3 = "cor3"
THM4 = "thm4"
RANDOM_BUDGET = "random"
KINDS = (THM1, THM3, COR3, THM4, RANDOM_BUDGET)

_DEFAULTS = {
    THM1: {"alpha": 2.0, "beta": 1.0},
    THM3: {"eps": 1.0},
    COR3: {"k": 2, "eps": 0.01},
    THM4: {"n": 100, "gamma": 0.5},
    RANDOM_BUDGET: {"n": 6, "m": 20, "T": 10.0, "dist": "lognormal", "mu": 0.0,
                    "sigma": 1.0, "lo": 0.0, "hi": 1.0, "sparsity": 0.3},
}
_INT_PARAMS = {"k", "n", "m"}
_STR_PARAMS = {"dist"}


@dataclass(frozen=True)
class ForgeRecipe:
    kind: str
    params: dict = field(default_factory=dict)
    seed: Optional[int] = None

    def param(self, key):
        return self.params.get(key, _DEFAULTS[self.kind].get(key))


def parse_recipe(text: str) -> ForgeRecipe:
    """``kind:key=val,key=val``, e.g. ``thm4:n=200,gamma=0.5,beta=0.62``."""
    kind, _, rest = text.strip().partition(":")
    kind = kind.lower()
    if kind not in KINDS:
        raise BadParams(f"unknown recipe kind {kind!r}; expected one of {KINDS}")
    params, seed = {}, None
    for part in filter(None, (p.strip() for p in rest.split(","))):
        key, sep, val = part.partition("=")
        if not sep:
            raise BadParams(f"recipe parameter {part!r} is not key=value")
        key = key.strip()
        try:
            if key == "seed":
                seed = int(val)
            elif key in _INT_PARAMS:
                params[key] = int(val)
            elif key in _STR_PARAMS:
                params[key] = val.strip().lower()
            else:
                params[key] = float(val)
        except ValueError:
            raise BadParams(f"bad value in recipe parameter {part!r}") from None
    return ForgeRecipe(kind, params, seed)


def smallest_beta(gamma: float, tol: float = 1e-12) -> float:
    """Smallest beta with beta**(1 - gamma) * (1 + beta)**gamma >= 1 (left side increases in beta)."""
    if gamma >= 1:
        raise BadParams("no positive smallest beta for gamma = 1")

    def h(b):
        return (1 - gamma) * np.log(b) + gamma * np.log1p(b)

    lo, hi = 0.0, 1.0
    while h(hi) < 0:
        hi *= 2.0
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if mid > 0 and h(mid) >= 0:
            hi = mid
        else:
            lo = mid
    return hi


def _proportional(agent, group_item, share, m):
    return compile_proportionality(ProportionalitySpec(agent, ((group_item,),), (share,)), m)


def paper_instance(recipe: ForgeRecipe):
    """Return ``(instance, {agent: ConstraintSet})`` for a worst-case construction."""
    kind = recipe.kind
    if kind == THM1:
        a, b = float(recipe.param("alpha")), float(recipe.param("beta"))
        if not (a > 0 and b > 0):
            raise BadParams("thm1 needs alpha, beta > 0")
        inst = build_instance([[a, 0.0], [0.0, b]])
        eq = compile_proportionality(ProportionalitySpec(0, ((0,), (1,)), (0.5, 0.5)), 2)
        return inst, {0: eq}
    if kind == THM3:
        eps = float(recipe.param("eps"))
        if not 0 < eps <= 1:
            raise BadParams("thm3 needs eps in (0, 1]")
        inst = build_instance([[1.0, 0.0], [1.0, 1.0]])
        # eps * x_10 = x_11  <=>  x_11 is an eps/(1+eps) share of agent 1's mass
        return inst, {1: _proportional(1, 1, eps / (1 + eps), 2)}
    if kind == COR3:
        k, eps = int(recipe.param("k")), float(recipe.param("eps"))
        if k < 1 or not 0 < eps <= 1:
            raise BadParams("cor3 needs k >= 1 and eps in (0, 1]")
        v = np.zeros((k + 1, k + 1))
        v[:, 0] = 1.0
        for i in range(1, k + 1):
            v[i, i] = 1.0
        inst = build_instance(v)
        cons = {}
        for i in range(1, k + 1):
            # eps * x_i0 = x_ii, leaving the worthless items unconstrained
            a = np.zeros(k + 1)
            a[0], a[i] = eps, -1.0
            cons[i] = ConstraintSet((LinearRelation(i, a, EQ, 0.0),))
        return inst, cons
    if kind == THM4:
        n, gamma = int(recipe.param("n")), float(recipe.param("gamma"))
        if n < 2 or gamma > 1:
            raise BadParams("thm4 needs n >= 2 and gamma <= 1")
        beta = recipe.params.get("beta")
        beta = smallest_beta(gamma) if beta is None else float(beta)
        c = beta * n
        if not beta > 0 or c < 1:
            raise BadParams(f"thm4 needs beta > 0 with beta * n >= 1, got beta={beta}")
        v = np.zeros((n + 1, 2 * n + 1))
        v[0, 0] = c
        for i in range(1, n + 1):
            v[0, i] = 1.0
            v[i, i] = 1.0
            v[i, i + n] = c - 1.0
        inst = build_instance(v)
        spec = ProportionalitySpec(0, tuple((j,) for j in range(n + 1)), (1.0 / (n + 1),) * (n + 1))
        return inst, {0: compile_proportionality(spec, 2 * n + 1)}
    if kind == RANDOM_BUDGET:
        p = {key: recipe.param(key) for key in _DEFAULTS[RANDOM_BUDGET]}
        dist = (p["dist"], p["mu"], p["sigma"]) if p["dist"] == "lognormal" else (p["dist"], p["lo"], p["hi"])
        seed = 0 if recipe.seed is None else recipe.seed
        return random_budget_instance(int(p["n"]), int(p["m"]), float(p["T"]), seed, dist, float(p["sparsity"])), {}
    raise BadParams(f"unknown recipe kind {kind!r}")


def random_budget_instance(n, m, T, seed, value_dist=("lognormal", 0.0, 1.0), sparsity=0.0) -> Instance:
    """Seeded random budget-capped instance.

    Uses numpy's PCG64 (``default_rng(seed)``) and draws, in order: the n x m
    values, an n x m uniform mask (entries below ``sparsity`` are zeroed) and
    n budgets ``T * (1 - U)`` with ``U`` uniform on [0, 1), i.e. in (0, T].
    """
    if n < 1 or m < 1 or not T > 0 or not 0 <= sparsity < 1:
        raise BadParams("need n, m >= 1, T > 0 and sparsity in [0, 1)")
    kind, a, b = value_dist
    rng = np.random.default_rng(seed)
    if kind == "lognormal":
        if not b > 0:
            raise BadParams("lognormal sigma must be positive")
        values = rng.lognormal(a, b, size=(n, m))
    elif kind == "uniform":
        if not 0 <= a < b:
            raise BadParams("uniform needs 0 <= lo < hi")
        values = rng.uniform(a, b, size=(n, m))
    else:
        raise BadParams(f"unknown value distribution {kind!r}")
    values[rng.random((n, m)) < sparsity] = 0.0
    budgets = T * (1.0 - rng.random(n))
    return build_instance(values, budgets)


def _rows(csv_text: str, header: tuple):
    lines = [ln.strip() for ln in csv_text.splitlines() if ln.strip()]
    if not lines:
        raise MalformedCSV("empty CSV")
    got = tuple(h.strip().lower() for h in lines[0].split(","))
    if got != header:
        raise MalformedCSV(f"expected header {','.join(header)}, got {lines[0]!r}")
    if len(lines) < 2:
        raise MalformedCSV("CSV has a header but no rows")
    out = []
    for lineno, ln in enumerate(lines[1:], start=2):
        parts = [p.strip() for p in ln.split(",")]
        if len(parts) != len(header) or not parts[0] or not parts[1]:
            raise MalformedCSV(f"line {lineno}: expected {len(header)} fields")
        try:
            num = float(parts[2])
        except ValueError:
            raise MalformedCSV(f"line {lineno}: {parts[2]!r} is not a number") from None
        if not np.isfinite(num):
            raise MalformedCSV(f"line {lineno}: non-finite number")
        out.append((parts[0], parts[1], num))
    return out


def ingest_category_counts(csv_text: str, value_scale: float = 1.0) -> Instance:
    """``agent,item,count`` rows -> values ``value_scale * count``; duplicate pairs are summed."""
    rows = _rows(csv_text, ("agent", "item", "count"))
    agents, items, totals = {}, {}, {}
    for a, it, cnt in rows:
        if cnt < 0:
            raise NegativeCount(f"negative count for ({a}, {it})")
        agents.setdefault(a, len(agents))
        items.setdefault(it, len(items))
        totals[a, it] = totals.get((a, it), 0.0) + cnt
    v = np.zeros((len(agents), len(items)))
    for (a, it), cnt in totals.items():
        v[agents[a], items[it]] = value_scale * cnt
    return build_instance(v, agent_labels=list(agents), item_labels=list(items))


def ingest_bid_log(csv_text: str, max_items: int = 20, max_agents: int = 6) -> Instance:
    """``advertiser,ad,bid`` rows -> the first ``max_items`` ads and the advertisers bidding on most of them.

    A repeated (advertiser, ad) pair keeps its last bid; advertiser ties keep
    first-appearance order.
    """
    rows = _rows(csv_text, ("advertiser", "ad", "bid"))
    ads = {}
    for _, ad, _ in rows:
        if ad not in ads and len(ads) < max_items:
            ads[ad] = len(ads)
    bids, order = {}, {}
    for adv, ad, bid in rows:
        if bid < 0:
            raise NegativeBid(f"negative bid for ({adv}, {ad})")
        order.setdefault(adv, len(order))
        if ad in ads:
            bids[adv, ad] = bid
    coverage = {adv: 0 for adv in order}
    for adv, _ in bids:
        coverage[adv] += 1
    ranked = sorted(order, key=lambda a: (-coverage[a], order[a]))[:max_agents]
    v = np.zeros((len(ranked), len(ads)))
    for r, adv in enumerate(ranked):
        for ad, j in ads.items():
            v[r, j] = bids.get((adv, ad), 0.0)
    return build_instance(v, agent_labels=ranked, item_labels=list(ads))
