"""Welfarist objective families.

Each rule maximizes ``sum_i f(V_i)`` for a concave nondecreasing ``f``.  The
scaling function ``g(y) = y f'(y)`` decides how externalities propagate; its
range ratio ``min g / max g`` is the rule's delta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from fairdiv.errors import NonPositiveArgument, RuleParseError

GAMMA_FAIR = "gamma"
NASH = "nw"
SOCIAL = "sw"
EXPONENTIAL = "exp"
SMOOTH_NW = "snw"
LOGLOG = "loglog"
COMBO_NW = "combo"

FAMILIES = (GAMMA_FAIR, NASH, SOCIAL, EXPONENTIAL, SMOOTH_NW, LOGLOG, COMBO_NW)

_DELTA = {NASH: 1.0, SOCIAL: 0.0, EXPONENTIAL: 0.0, SMOOTH_NW: 0.0, LOGLOG: 0.0, COMBO_NW: 0.5}


@dataclass(frozen=True)
class WelfareRule:
    family: str
    param: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise RuleParseError(f"unknown rule family {self.family!r}")
        if self.family == GAMMA_FAIR:
            g = float(self.param)
            if not math.isfinite(g) or g > 1 or g == 0:
                raise RuleParseError(f"gamma must be a nonzero real <= 1, got {self.param}")
        if self.family == EXPONENTIAL and not self.param > 0:
            raise RuleParseError(f"exponential rate must be positive, got {self.param}")

    @property
    def name(self) -> str:
        if self.family == GAMMA_FAIR:
            return f"gamma={self.param:g}"
        if self.family == EXPONENTIAL:
            return f"exp={self.param:g}"
        return self.family

    def __str__(self):
        return self.name

    @property
    def gamma(self):
        """Exponent on the gamma-fair scale, or None for other families."""
        if self.family == GAMMA_FAIR:
            return float(self.param)
        return {NASH: 0.0, SOCIAL: 1.0}.get(self.family)

    @property
    def diverges_at_zero(self) -> bool:
        """True when f(0) = -inf, so zero-value agents must leave the objective."""
        if self.family in (NASH, LOGLOG, COMBO_NW):
            return True
        return self.family == GAMMA_FAIR and self.param < 0

    def f(self, y):
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.family == NASH:
                return np.log(y)
            if self.family == SOCIAL:
                return y.copy()
            if self.family == GAMMA_FAIR:
                return np.power(y, self.param) / self.param
            if self.family == EXPONENTIAL:
                return 1.0 - np.exp(-self.param * y)
            if self.family == SMOOTH_NW:
                return np.log1p(y)
            if self.family == LOGLOG:
                return np.log(np.log1p(y))
            return 2.0 * np.log(y) - np.log1p(y)

    def fprime(self, y):
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.family == NASH:
                return 1.0 / y
            if self.family == SOCIAL:
                return np.ones_like(y)
            if self.family == GAMMA_FAIR:
                return np.power(y, self.param - 1.0)
            if self.family == EXPONENTIAL:
                return self.param * np.exp(-self.param * y)
            if self.family == SMOOTH_NW:
                return 1.0 / (1.0 + y)
            if self.family == LOGLOG:
                return 1.0 / ((1.0 + y) * np.log1p(y))
            return 2.0 / y - 1.0 / (1.0 + y)

    def g(self, y):
        y = np.asarray(y, dtype=float)
        if self.family == NASH:
            return np.ones_like(y)
        if self.family == COMBO_NW:
            return 2.0 - y / (1.0 + y)
        return y * self.fprime(y)


def welfare_terms(rule: WelfareRule, y: float):
    """Return ``(f(y), f'(y), g(y))`` for a positive scalar ``y``."""
    y = float(y)
    if not y > 0:
        raise NonPositiveArgument(f"welfare terms need y > 0, got {y}")
    return float(rule.f(y)), float(rule.fprime(y)), float(rule.g(y))


def delta_of(rule: WelfareRule) -> float:
    """Analytic delta = inf_{x,y} g(y)/g(x); only NW (1) and the NW/SNW combo (1/2) are positive."""
    if rule.family == GAMMA_FAIR:
        return 0.0
    return _DELTA[rule.family]


def pmon_bound(gamma: float, tol: float = 1e-12) -> float:
    """Root in [0, 1] of p**(1 - gamma) + p = 1, the gamma-fair monotonicity factor."""
    gamma = float(gamma)
    if gamma > 1:
        raise ValueError(f"gamma must be <= 1, got {gamma}")
    if gamma == 1:
        return 0.0
    expo = 1.0 - gamma
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid**expo + mid - 1.0 < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def parse_rule(text: str) -> WelfareRule:
    """Parse ``sw``, ``nw``, ``mmf``, ``snw``, ``loglog``, ``combo``, ``gamma=<g>``, ``exp=<lam>``."""
    s = text.strip().lower()
    simple = {"sw": SOCIAL, "nw": NASH, "snw": SMOOTH_NW, "loglog": LOGLOG, "combo": COMBO_NW}
    if s in simple:
        return WelfareRule(simple[s])
    if s == "mmf":
        return WelfareRule(GAMMA_FAIR, -1.0)
    key, sep, val = s.partition("=")
    if not sep:
        raise RuleParseError(f"cannot parse rule {text!r}")
    try:
        num = float(val)
    except ValueError:
        raise RuleParseError(f"bad number in rule {text!r}") from None
    if key == "gamma":
        if num == 0:
            return WelfareRule(NASH)
        return WelfareRule(GAMMA_FAIR, num)
    if key == "exp":
        return WelfareRule(EXPONENTIAL, num)
    raise RuleParseError(f"cannot parse rule {text!r}")
