import itertools
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from nmlcomp import Luckiness, make_model
from nmlcomp.discrete import (
    FiberIndex,
    comp_bruteforce_discrete,
    comp_via_pushforward,
    comp_via_sufficient_stat,
    discrete_comp,
    pushforward_pmf,
)
from nmlcomp.errors import EnumerationBudgetExceededError, NoSufficientStatError

HALF = Luckiness.box([0.0], [0.5])


def bernoulli_comp_float(N):
    """Independent float oracle: sum over counts of C(N,k) (k/N)^k (1-k/N)^(N-k)."""
    return math.fsum(math.comb(N, k) * (k / N) ** k * (1 - k / N) ** (N - k) for k in range(N + 1))


def multinomial_comp_float(m, N):
    total = []
    for counts in itertools.product(range(N + 1), repeat=m):
        if sum(counts) != N:
            continue
        coef = math.factorial(N)
        for c in counts:
            coef //= math.factorial(c)
        total.append(coef * math.prod((c / N) ** c for c in counts))
    return math.fsum(total)


class TestExamples:
    @pytest.mark.parametrize("N, v, expected", [(2, None, Fraction(5, 2)), (1, None, 2), (2, HALF, Fraction(3, 2))])
    def test_bruteforce(self, N, v, expected):
        assert comp_bruteforce_discrete(make_model("bernoulli", N=N), v) == expected

    @pytest.mark.parametrize("source, target, expected", [(0.5, 0.5, Fraction(1, 2)), (0, 0, 1), (0.5, 0.25, 0)])
    def test_pushforward_pmf(self, source, target, expected):
        assert pushforward_pmf(make_model("bernoulli", N=2), source, target) == expected

    def test_pushforward_comp(self):
        assert comp_via_pushforward(make_model("bernoulli", N=2)) == Fraction(5, 2)

    def test_constant_estimator(self):
        model = make_model("bernoulli", N=2)
        const = lambda x: (Fraction(1, 2),)
        assert comp_via_pushforward(model, estimator=const) == 1
        assert comp_bruteforce_discrete(model, estimator=const) == 1

    def test_multinomial(self):
        assert comp_via_pushforward(make_model("multinomial", m=3, N=2)) == Fraction(9, 2)

    @pytest.mark.parametrize("N, expected", [(2, Fraction(5, 2)), (1, 2)])
    def test_sufficient_stat(self, N, expected):
        assert comp_via_sufficient_stat(make_model("bernoulli", N=N)) == expected

    def test_bernoulli_four_by_enumeration(self):
        # 1 + 4 (1/4)(3/4)^3 + 6 (1/2)^4 + 4 (3/4)^3 (1/4) + 1 over the 16 outcomes
        model = make_model("bernoulli", N=4)
        direct = sum(Fraction(1, 1) * model.pmf_exact(model.mle_key(x), x)
                     for x in itertools.product((0, 1), repeat=4))
        assert direct == Fraction(103, 32)
        assert comp_via_sufficient_stat(model) == Fraction(103, 32)

    def test_no_sufficient_stat(self):
        class NoStat(type(make_model("bernoulli"))):
            pass

        NoStat.has_sufficient_stat = False
        with pytest.raises(NoSufficientStatError):
            comp_via_sufficient_stat(NoStat(N=2))

    def test_budget(self):
        with pytest.raises(EnumerationBudgetExceededError):
            comp_bruteforce_discrete(make_model("bernoulli", N=24))
        with pytest.raises(EnumerationBudgetExceededError):
            comp_bruteforce_discrete(make_model("bernoulli", N=5), budget=31)


class TestThreeWayAgreement:
    @pytest.mark.parametrize("N", range(1, 13))
    def test_bernoulli(self, N):
        r = discrete_comp(make_model("bernoulli", N=N))
        assert r.discrepancy == 0.0
        assert abs(r.comp_value - bernoulli_comp_float(N)) <= 1e-12 * r.comp_value

    @pytest.mark.parametrize("N", range(1, 7))
    def test_multinomial(self, N):
        r = discrete_comp(make_model("multinomial", m=3, N=N))
        assert r.discrepancy == 0.0
        assert abs(r.comp_value - multinomial_comp_float(3, N)) <= 1e-12 * r.comp_value

    @pytest.mark.parametrize("v", [HALF, Luckiness.box([0.25], [0.75]).scaled(2.5),
                                   Luckiness.custom(lambda T: 1 + T[:, 0] ** 2)])
    def test_with_luckiness(self, v):
        assert discrete_comp(make_model("bernoulli", N=6), v).discrepancy == 0.0

    def test_multinomial_box_luckiness(self):
        v = Luckiness.box([0, 0, 0], [0.5, 1, 1])
        assert discrete_comp(make_model("multinomial", m=3, N=4), v).discrepancy == 0.0

    def test_report(self):
        d = discrete_comp(make_model("bernoulli", N=2)).to_dict()
        assert d["comp_exact"] == "5/2" and d["log_comp"] == pytest.approx(math.log2(2.5))
        assert set(d["methods"]) == {"brute", "pushforward", "sufficient-stat"}


class TestProperties:
    @pytest.mark.parametrize("model_id, params", [("bernoulli", {"N": 5}), ("multinomial", {"m": 3, "N": 3})])
    def test_pushforward_normalizes(self, model_id, params):
        model = make_model(model_id, **params)
        index = FiberIndex.build(model)
        sources = [(Fraction(2, 7),), (Fraction(1),)] if model_id == "bernoulli" else \
            [(Fraction(1, 5), Fraction(3, 10), Fraction(1, 2)), (Fraction(0), Fraction(1), Fraction(0))]
        for source in sources:
            assert sum(index.mass(model, source, t) for t in index.image) == 1

    @given(st.integers(1, 8), st.fractions(0, 20))
    @settings(max_examples=40, deadline=None)
    def test_linearity(self, N, c):
        model = make_model("bernoulli", N=N)
        c = Fraction(float(c))
        assert comp_bruteforce_discrete(model, Luckiness.one().scaled(c)) == c * comp_bruteforce_discrete(model)

    @given(st.integers(1, 8), st.floats(0, 1), st.floats(0, 1), st.floats(0, 0.5))
    @settings(max_examples=60, deadline=None)
    def test_monotone_in_luckiness(self, N, a, b, grow):
        lo, hi = min(a, b), max(a, b)
        model = make_model("bernoulli", N=N)
        small = comp_bruteforce_discrete(model, Luckiness.box([lo], [hi]))
        large = comp_bruteforce_discrete(model, Luckiness.box([max(lo - grow, 0)], [min(hi + grow, 1)]))
        assert small <= large <= comp_bruteforce_discrete(model)

    def test_pushforward_matches_bruteforce_for_arbitrary_maps(self):
        model = make_model("bernoulli", N=4)
        estimators = [lambda x: (Fraction(x[0]),), lambda x: (Fraction(min(sum(x), 2), 4),),
                      lambda x: (Fraction(x[0] + x[-1], 2),)]
        for est in estimators:
            assert comp_via_pushforward(model, estimator=est) == comp_bruteforce_discrete(model, estimator=est)
