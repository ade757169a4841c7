"""Exact complexity of discrete models, three independent ways.

Every sum runs in rational arithmetic (``fractions.Fraction``), so the three
routes agree exactly rather than to a floating-point tolerance:

* brute force over the data space, ``sum_x P(est(x), x) v(est(x))``;
* grouped by the estimator's fibers, ``sum_t P[est # mu_t]({t}) v(t)``;
* through a sufficient statistic's closed-form law, ``sum_s P[s # mu_{t(s)}]({s}) v(t(s))``.
"""

from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
import math
from typing import Callable, Optional

from .errors import EnumerationBudgetExceededError, NoSufficientStatError
from .luckiness import Luckiness

ENUMERATION_BUDGET = 10**7
METHODS = ("brute", "pushforward", "sufficient-stat")


def _estimator(model, estimator):
    return model.mle_key if estimator is None else estimator


def _enumerate(model, budget):
    size = model.data_space.size()
    if size > budget:
        raise EnumerationBudgetExceededError(
            f"{model.id}: {size} data points exceed the enumeration budget {budget}", size=size)
    return model.enumerate()


def comp_bruteforce_discrete(model, v=None, estimator=None, budget=ENUMERATION_BUDGET):
    """``sum_x P(est(x), x) * v(est(x))`` over every data point, as a Fraction.

    ``estimator`` maps a data tuple to an exact parameter key (default: the MLE).
    """
    v = v or Luckiness()
    est = _estimator(model, estimator)
    total = Fraction(0)
    for x in _enumerate(model, budget):
        key = est(x)
        w = v.exact(key)
        if w:
            total += model.pmf_exact(key, x) * w
    return total


@dataclass
class FiberIndex:
    """Data points grouped by estimator value: the preimages ``est^{-1}({t})``."""

    fibers: dict

    @classmethod
    def build(cls, model, estimator=None, budget=ENUMERATION_BUDGET):
        est = _estimator(model, estimator)
        fibers = defaultdict(list)
        for x in _enumerate(model, budget):
            fibers[est(x)].append(x)
        return cls(dict(fibers))

    @property
    def image(self):
        return sorted(self.fibers)

    def mass(self, model, source, target):
        return sum((model.pmf_exact(source, x) for x in self.fibers.get(target, ())), Fraction(0))


def pushforward_pmf(model, source, target, estimator=None, index=None):
    """``P[est # mu_source]({target})``: the probability under ``source`` that
    the estimator returns ``target``. Unreachable targets get 0."""
    index = index or FiberIndex.build(model, estimator)
    return index.mass(model, _key(source), _key(target))


def comp_via_pushforward(model, v=None, estimator=None, index=None):
    """Sum over the estimator image of the pushforward mass at its own index."""
    v = v or Luckiness()
    index = index or FiberIndex.build(model, estimator)
    total = Fraction(0)
    for t in index.image:
        w = v.exact(t)
        if w:
            total += index.mass(model, t, t) * w
    return total


def comp_via_sufficient_stat(model, v=None):
    """Sum over statistic values ``s`` of ``P(s(X) = s)`` under the MLE
    recovered from ``s``, using the model's closed-form statistic law."""
    v = v or Luckiness()
    if not model.has_sufficient_stat:
        raise NoSufficientStatError(f"{model.id} registers no sufficient statistic")
    total = Fraction(0)
    for s in model.stat_support():
        t = model.mle_from_stat_key(s)
        w = v.exact(t)
        if w:
            total += model.stat_pmf_exact(t, s) * w
    return total


def _key(theta):
    if isinstance(theta, tuple) and all(isinstance(t, Fraction) for t in theta):
        return theta
    if isinstance(theta, (int, float, Fraction)):
        theta = (theta,)
    # floats convert exactly; 0.5 and Fraction(1, 2) are the same key
    return tuple(Fraction(t).limit_denominator(10**12) if not isinstance(t, Fraction) else t
                 for t in theta)


@dataclass
class DiscreteCompResult:
    comp_value: float
    exact: Fraction
    values: dict
    discrepancy: float
    base: float = 2.0
    luckiness: str = "one"
    model: dict = field(default_factory=dict)

    @property
    def log_comp(self):
        if self.exact == 0:
            return -math.inf
        return (math.log(self.exact.numerator) - math.log(self.exact.denominator)) / math.log(self.base)

    @property
    def value(self):
        return self.comp_value

    def to_dict(self):
        return {
            "model": self.model,
            "luckiness": self.luckiness,
            "comp": self.comp_value,
            "comp_exact": f"{self.exact.numerator}/{self.exact.denominator}",
            "log_comp": self.log_comp,
            "base": self.base,
            "methods": {k: float(val) for k, val in self.values.items()},
            "methods_exact": {k: f"{val.numerator}/{val.denominator}" for k, val in self.values.items()},
            "max_discrepancy": self.discrepancy,
        }


def discrete_comp(model, v=None, methods=METHODS, estimator=None, base=2.0):
    """Run the requested routes and report their values and the largest gap."""
    v = v or Luckiness()
    values = {}
    for method in methods:
        if method == "brute":
            values[method] = comp_bruteforce_discrete(model, v, estimator)
        elif method == "pushforward":
            values[method] = comp_via_pushforward(model, v, estimator)
        elif method == "sufficient-stat":
            values[method] = comp_via_sufficient_stat(model, v)
        else:
            raise ValueError(f"unknown discrete method {method!r}")
    vals = list(values.values())
    gap = max((abs(a - b) for a in vals for b in vals), default=Fraction(0))
    return DiscreteCompResult(float(vals[0]), vals[0], values, float(gap), base, v.ident,
                              model.describe())
