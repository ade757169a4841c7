import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate as si, stats

from nmlcomp import Luckiness, make_model
from nmlcomp.continuous import (
    CompReport,
    EstimatorPdfSource,
    clamped_comp_closed_form,
    comp_bruteforce_continuous,
    compare,
    diagonal,
    estimator_pdf,
    exponential_lmc_closed_form,
    g_curve,
    kraft_integral,
    lmc_gfunction,
    nml_code_length,
    select_model,
)
from nmlcomp.errors import InfiniteCompError, JacobianDegenerateError, NoClosedFormError
from nmlcomp.models import log_max_likelihood, rate_parametrization
from nmlcomp.quadrature import QuadratureSpec

E = math.e
BAND = Luckiness.box([1.0], [E])
COAREA = EstimatorPdfSource("coarea-chart")
HIST = EstimatorPdfSource("mc-histogram", seed=3)


class TestEstimatorPdf:
    @pytest.mark.parametrize("N", [1, 2, 5])
    @pytest.mark.parametrize("theta", [0.5, 2.0])
    def test_exponential_gamma(self, N, theta):
        T = np.linspace(0.05, 6, 40)
        got = estimator_pdf(make_model("exponential", N=N), theta, T)
        np.testing.assert_allclose(got, stats.gamma.pdf(T, N, scale=theta / N), rtol=1e-12)

    def test_exponential_diagonal(self):
        assert estimator_pdf(make_model("exponential", N=2), 1.0, 1.0) == pytest.approx(4 * math.exp(-2), rel=1e-14)
        T = np.array([0.3, 1.0, 7.0])
        np.testing.assert_allclose(diagonal(make_model("exponential", N=2))(T), 4 * math.exp(-2) / T, rtol=1e-13)

    @pytest.mark.parametrize("tp", [0.25, 0.5, 1.0, 2.0])
    def test_aniso_chart(self, aniso, tp):
        assert abs(estimator_pdf(aniso, 1.0, tp, COAREA) - math.exp(-tp)) < 1e-6

    @pytest.mark.parametrize("model_id, theta, tp", [("aniso-gauss-2d", 1.0, 0.5), ("exponential", 1.0, 0.7)])
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_histogram_oracle(self, model_id, theta, tp, seed):
        model = make_model(model_id)
        ref = estimator_pdf(model, theta, tp)
        got = estimator_pdf(model, theta, tp, EstimatorPdfSource("mc-histogram", seed=seed))
        assert abs(got / ref - 1) < 0.02

    @pytest.mark.parametrize("seed", range(5))
    def test_narrow_bin_within_counting_noise(self, aniso, seed):
        # a 0.01 bin holds ~6000 of 10^6 estimates: relative sd ~1.3%
        n, width, tp = 10**6, 0.01, 0.5
        ref = math.exp(-tp)
        got = estimator_pdf(aniso, 1.0, tp, EstimatorPdfSource("mc-histogram", seed=seed, bin_width=width))
        sd = math.sqrt(ref * width * (1 - ref * width) / n) / width
        assert abs(got - ref) <= 4 * sd

    @pytest.mark.parametrize("model_id", ["aniso-gauss-2d", "exponential"])
    def test_closed_vs_chart(self, model_id):
        model = make_model(model_id)
        T = np.array([0.1, 0.6, 1.4, 3.0])
        np.testing.assert_allclose(estimator_pdf(model, 1.3, T, COAREA), estimator_pdf(model, 1.3, T), atol=1e-6)

    def test_gauss_mean_chart(self):
        model = make_model("gauss-mean", N=3)
        got = estimator_pdf(model, 0.2, np.array([-0.5, 0.2, 1.0]), COAREA)
        np.testing.assert_allclose(got, stats.norm.pdf([-0.5, 0.2, 1.0], 0.2, 1 / math.sqrt(3)), rtol=1e-8)

    def test_clamped_has_no_closed_form(self):
        with pytest.raises(NoClosedFormError):
            estimator_pdf(make_model("exponential-clamped"), 1.5, 1.5)

    @pytest.mark.parametrize("model_id, params, src, theta, lo, hi", [
        ("exponential", {"N": 1}, None, 1.0, 0.0, np.inf),
        ("exponential", {"N": 4}, None, 2.5, 0.0, np.inf),
        ("aniso-gauss-2d", {}, None, 0.8, 0.0, np.inf),
        ("aniso-gauss-2d", {}, COAREA, 1.0, 0.0, 40.0),
        ("gauss-mean", {"N": 2}, None, -1.0, -np.inf, np.inf),
    ])
    def test_normalization(self, model_id, params, src, theta, lo, hi):
        model = make_model(model_id, **params)
        total, _ = si.quad(lambda t: estimator_pdf(model, theta, t, src), lo, hi, epsabs=1e-10, limit=200)
        assert total == pytest.approx(1.0, abs=1e-6)

    def test_source_validation(self):
        with pytest.raises(ValueError):
            EstimatorPdfSource("kde")
        with pytest.raises(ValueError):
            lmc_gfunction(make_model("exponential"), BAND, HIST)


class TestCentralEquality:
    @pytest.mark.parametrize("N", [1, 2, 3])
    def test_exponential(self, N):
        expected = exponential_lmc_closed_form(N, 1, E)
        r = compare(make_model("exponential", N=N), BAND)
        assert abs(r["gfunction"].value / expected - 1) < 1e-10
        assert abs(r["brute"].value / expected - 1) < 1e-6
        assert r["residual"] < 1e-6

    def test_exponential_qmc(self):
        expected = exponential_lmc_closed_form(5, 1, E)
        r = comp_bruteforce_continuous(make_model("exponential", N=5, truncation=60.0), BAND)
        assert r.details["quadrature"] == "qmc" and r.nodes_used >= 2**18
        assert abs(r.value / expected - 1) < 0.01

    def test_exponential_other_boxes(self):
        v = Luckiness.box([0.5], [3.0])
        r = compare(make_model("exponential", N=2), v)
        assert r["residual"] < 1e-6
        assert r["gfunction"].value == pytest.approx(exponential_lmc_closed_form(2, 0.5, 3.0), rel=1e-10)

    def test_exponential_via_chart(self):
        g = lmc_gfunction(make_model("exponential", N=2), BAND, COAREA)
        assert g.value == pytest.approx(4 * math.exp(-2), rel=1e-9)

    @pytest.mark.parametrize("v", [Luckiness.box([0.5], [2.0]), Luckiness.box([0.1], [1.0])])
    def test_aniso(self, aniso, v):
        expected = math.log(v.upper[0] / v.lower[0]) / E  # g(theta) = exp(-1) / theta
        r = compare(aniso, v)
        assert r["gfunction"].value == pytest.approx(expected, rel=1e-10)
        assert r["brute"].value == pytest.approx(expected, rel=1e-6)
        assert lmc_gfunction(aniso, v, COAREA).value == pytest.approx(expected, rel=1e-8)

    def test_gauss_mean(self):
        v = Luckiness.box([0.0], [1.0])
        model = make_model("gauss-mean", N=4)
        expected = math.sqrt(4 / (2 * math.pi))
        assert lmc_gfunction(model, v).value == pytest.approx(expected, rel=1e-12)
        brute = comp_bruteforce_continuous(model, v)
        assert abs(brute.value / expected - 1) < 1e-3

    def test_gauss_mean_grid(self):
        v = Luckiness.box([-1.0], [0.5])
        model = make_model("gauss-mean", N=2)
        r = compare(model, v)
        assert r["gfunction"].value == pytest.approx(1.5 / math.sqrt(math.pi), rel=1e-12)
        assert r["residual"] < 1e-6

    def test_clamped(self):
        model = make_model("exponential-clamped")
        r = comp_bruteforce_continuous(model)
        assert abs(r.value - (1 + 1 / E)) < 1e-6
        with pytest.raises((JacobianDegenerateError, NoClosedFormError)):
            lmc_gfunction(model, source=COAREA)

    def test_clamped_two_draws(self):
        model = make_model("exponential-clamped", N=2)
        r = comp_bruteforce_continuous(model)
        assert r.value == pytest.approx(clamped_comp_closed_form(2, 1, E), rel=1e-6)


class TestSetMonotonicity:
    INTERVALS = [(1.0, E), (0.8, E), (0.8, 4.0), (0.5, 6.0)]

    def test_nested_clamps(self):
        values = [comp_bruteforce_continuous(make_model("exponential-clamped", a=a, b=b)).value
                  for a, b in self.INTERVALS]
        assert all(x <= y for x, y in zip(values, values[1:]))
        for (a, b), got in zip(self.INTERVALS, values):
            assert got == pytest.approx(1 + math.log(b / a) / E, rel=1e-6)

    @given(st.floats(0.1, 5), st.floats(1.0, 3.0), st.floats(1.0, 3.0), st.integers(1, 6))
    @settings(max_examples=60, deadline=None)
    def test_closed_form_monotone(self, a, wider_lo, wider_hi, N):
        b = 2 * a
        assert clamped_comp_closed_form(N, a / wider_lo, b * wider_hi) >= clamped_comp_closed_form(N, a, b)


class TestReparametrization:
    @pytest.mark.parametrize("N", [1, 2])
    def test_rate(self, N):
        base = make_model("exponential", N=N)
        rate = rate_parametrization(base)
        v_rate = Luckiness.box([1 / E], [1.0])
        expected = exponential_lmc_closed_form(N, 1, E)
        assert lmc_gfunction(rate, v_rate).value == pytest.approx(expected, rel=1e-10)
        assert comp_bruteforce_continuous(rate, v_rate).value == pytest.approx(expected, rel=1e-7)
        assert lmc_gfunction(base, BAND).value == pytest.approx(expected, rel=1e-10)

    @given(st.floats(0.1, 2.0), st.floats(1.1, 10.0))
    @settings(max_examples=25, deadline=None)
    def test_rate_any_box(self, lo, ratio):
        hi = lo * ratio
        base = make_model("exponential", N=3)
        a = lmc_gfunction(base, Luckiness.box([lo], [hi])).value
        b = lmc_gfunction(rate_parametrization(base), Luckiness.box([1 / hi], [1 / lo])).value
        assert a == pytest.approx(b, rel=1e-9)


class TestClosedForm:
    @pytest.mark.parametrize("args, expected", [((1, 1, E), math.exp(-1)), ((2, 1, E), 4 * math.exp(-2))])
    def test_values(self, args, expected):
        assert exponential_lmc_closed_form(*args) == pytest.approx(expected, rel=1e-15)

    @given(st.integers(1, 50), st.floats(1e-3, 1e3))
    def test_empty_interval(self, N, a):
        assert exponential_lmc_closed_form(N, a, a) == 0.0

    def test_matches_gamma_oracle(self):
        # N^N e^-N / Gamma(N) is theta times the Gamma(N, theta/N) density at its own scale
        for N in (1, 3, 8):
            assert exponential_lmc_closed_form(N, 1, E) == pytest.approx(stats.gamma.pdf(1, N, scale=1 / N), rel=1e-12)

    def test_rejects(self):
        with pytest.raises(ValueError):
            exponential_lmc_closed_form(0, 1, 2)


class TestDivergence:
    def test_unrestricted_exponential(self):
        model = make_model("exponential", N=2)
        g = lmc_gfunction(model)
        assert g.value == math.inf and g.diagnostic.startswith("divergent")
        b = comp_bruteforce_continuous(model)
        assert b.value == math.inf and b.diagnostic

    def test_half_open_box(self):
        g = lmc_gfunction(make_model("exponential"), Luckiness.box([1.0], [math.inf]))
        assert g.value == math.inf

    def test_gauss_mean_whole_line(self):
        assert lmc_gfunction(make_model("gauss-mean")).value == math.inf

    def test_convergent_tail_is_not_flagged(self):
        # g = 1 on the whole line is not integrable, but a decaying luckiness is
        v = Luckiness.custom(lambda T: np.exp(-T[:, 0] ** 2))
        r = lmc_gfunction(make_model("gauss-mean", N=2), v)
        assert r.value == pytest.approx(math.sqrt(2 / (2 * math.pi)) * math.sqrt(math.pi), rel=1e-8)

    def test_report_rejects_nan(self):
        with pytest.raises(ValueError):
            CompReport(float("nan"), "brute")


class TestNml:
    def test_clamped(self):
        model = make_model("exponential-clamped")
        r = nml_code_length(model, [1.0], 1 + 1 / E, E)
        assert r.l_NML == pytest.approx(1 + math.log(1 + 1 / E), rel=1e-14)

    def test_bernoulli(self):
        r = nml_code_length(make_model("bernoulli", N=2), (1, 1), 2.5, 2)
        assert r.l_NML == pytest.approx(math.log2(2.5), rel=1e-15)

    def test_constant_offset(self, rng):
        model = make_model("exponential", N=2)
        comp = lmc_gfunction(model, BAND)
        gaps = {round(nml_code_length(model, x, comp).l_NML - log_max_likelihood(model, x), 12)
                for x in rng.exponential(1.0, (30, 2))}
        assert len(gaps) == 1

    def test_exact_composition(self, rng):
        model = make_model("gauss-mean", N=3)
        for x in rng.normal(size=(10, 3)):
            r = nml_code_length(model, x, 0.7)
            assert r.l_NML == r.l_ML + r.log_comp

    def test_infinite(self):
        with pytest.raises(InfiniteCompError):
            nml_code_length(make_model("exponential"), [1.0], math.inf)


class TestSelect:
    def test_bernoulli_vs_multinomial(self):
        bern, multi = make_model("bernoulli", N=2), make_model("multinomial", m=3, N=2)
        assert select_model([(bern, 2.5), (multi, 4.5)], [(1, 1), (1, 1)]) == 0

    def test_duplicate_tie(self):
        bern = make_model("bernoulli", N=2)
        assert select_model([(bern, 2.5), (bern, 2.5)], (0, 1)) == 0

    def test_tie_prefers_smaller_comp(self):
        bern = make_model("bernoulli", N=2)
        # same l_ML; equal code lengths only if comps are equal, so shift by base
        assert select_model([(bern, 4.0), (bern, 2.5)], (0, 1)) == 1

    def test_exponential_vs_gauss(self):
        x = [0.01, 0.03, 0.02]
        expo = make_model("exponential", N=3)
        gauss = make_model("gauss-mean", N=3)
        c_exp = lmc_gfunction(expo, Luckiness.box([1e-3], [10.0])).value
        c_gauss = lmc_gfunction(gauss, Luckiness.box([-10.0], [10.0])).value
        l_exp = nml_code_length(expo, x, c_exp).l_NML
        l_gauss = nml_code_length(gauss, x, c_gauss).l_NML
        assert l_exp < l_gauss
        assert select_model([(gauss, c_gauss), (expo, c_exp)], x) == 1


class TestKraft:
    def test_clamped(self):
        model = make_model("exponential-clamped")
        r = kraft_integral(model, 1 + 1 / E, 60.0)
        assert abs(r.value - 1) < 1e-4

    def test_clamped_independent_quad(self):
        model = make_model("exponential-clamped")
        f = lambda x: math.exp(model.plugin_log_density(np.array([[x]]))[0]) / (1 + 1 / E)
        total = sum(si.quad(f, a, b, epsabs=1e-13)[0] for a, b in ((0, 1), (1, E), (E, 60)))
        assert total == pytest.approx(1.0, abs=1e-9)


class TestCurves:
    def test_g_curve(self):
        rows = g_curve(make_model("exponential", N=2), BAND, points=10)
        assert rows.shape == (10, 2) and np.all((rows[:, 0] > 1) & (rows[:, 0] < E))
        np.testing.assert_allclose(rows[:, 1], 4 * math.exp(-2) / rows[:, 0], rtol=1e-13)

    def test_g_curve_needs_finite_range(self):
        with pytest.raises(ValueError):
            g_curve(make_model("exponential"))
