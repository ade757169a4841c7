import math

import numpy as np
import pytest
from scipy import integrate as si

from nmlcomp import make_model
from nmlcomp.cases import case_ids, verify_coarea
from nmlcomp.errors import ChartInconsistentError, JacobianDegenerateError, NoChartError
from nmlcomp.geometry import (
    EstimatorMap,
    LevelSetChart,
    check_chart,
    check_ess_inf,
    coarea_lhs,
    coarea_rhs,
    fiber_integral,
    hausdorff_integral,
)
from nmlcomp.jacobian import JacobianProvider
from nmlcomp.quadrature import QuadratureSpec

circle = LevelSetChart([1.0], 1, lambda U: np.column_stack([np.cos(U[:, 0]), np.sin(U[:, 0])]),
                       [0.0], [2 * math.pi], periodic=True)


class TestHausdorff:
    def test_circumference(self):
        assert abs(hausdorff_integral(circle, lambda X: np.ones(len(X))).value - 2 * math.pi) < 1e-8

    def test_numeric_tangent_matches_analytic(self, aniso):
        chart = aniso.ellipse_chart(0.8)[0]
        bare = LevelSetChart(chart.level, 1, chart.param, chart.lower, chart.upper)
        U = np.linspace(0.1, 6.0, 50)[:, None]
        np.testing.assert_allclose(bare.surface_element(U), chart.surface_element(U), rtol=1e-8)

    def test_reparametrization_invariance(self):
        # the same circle traced at a non-uniform speed
        warped = LevelSetChart([1.0], 1, lambda U: np.column_stack([np.cos(U[:, 0] ** 2), np.sin(U[:, 0] ** 2)]),
                               [0.0], [math.sqrt(2 * math.pi)])
        g = lambda X: np.exp(X[:, 0])
        a = hausdorff_integral(circle, g).value
        b = hausdorff_integral(warped, g).value
        assert a == pytest.approx(2 * math.pi * 1.2660658777520082, rel=1e-9)  # 2 pi I0(1)
        assert b == pytest.approx(a, rel=1e-9)

    def test_point_chart_counts(self):
        chart = LevelSetChart([0.0], 0, points=[[1.0], [2.0], [5.0]])
        assert hausdorff_integral(chart, lambda X: X[:, 0]).value == 8.0

    @pytest.mark.parametrize("tp", [0.25, 0.5, 1.0, 2.0])
    def test_ellipse_fiber_is_exponential_density(self, aniso, tp):
        fmap = aniso.estimator_map()
        r = fiber_integral(fmap, lambda X: aniso.density(1.0, X), tp)
        assert abs(r.value - math.exp(-tp)) < 1e-7

    def test_point_fiber_exponential(self):
        model = make_model("exponential", N=1)
        r = fiber_integral(model.estimator_map(), lambda X: model.density(2.0, X), 0.7)
        assert r.value == pytest.approx(0.5 * math.exp(-0.35), rel=1e-15)

    def test_simplex_fiber_matches_gamma(self):
        # N = 3: fiber of the mean is a triangle; integral gives the Gamma(3, theta/3) density
        model = make_model("exponential", N=3)
        r = fiber_integral(model.estimator_map(), lambda X: model.density(1.0, X), 0.9,
                           QuadratureSpec(resolution=128))
        assert r.value == pytest.approx(model.pushforward_pdf(1.0, 0.9), rel=1e-6)


class TestChecks:
    def test_inconsistent_chart(self, aniso):
        fmap = aniso.estimator_map()
        bad = LevelSetChart([1.0], 1, circle.param, [0.0], [2 * math.pi])
        fine = aniso.ellipse_chart(1.0)
        check_chart(fine, fmap)
        with pytest.raises(ChartInconsistentError):
            check_chart([bad], fmap)

    def test_ess_inf_rejects_clamp(self):
        model = make_model("exponential-clamped")
        pts = np.random.default_rng(0).uniform(0, 20, (10_000, 1))
        with pytest.raises(JacobianDegenerateError):
            check_ess_inf(model.estimator_map(), points=pts)

    def test_no_chart(self):
        fmap = EstimatorMap(lambda X: X[:, :1], JacobianProvider(lambda X: X[:, :1]))
        with pytest.raises(NoChartError):
            fmap.charts(1.0)


class TestCoareaSides:
    def test_lhs_constant(self):
        assert abs(coarea_lhs(lambda X: np.ones(len(X)), [0, 0], [1, 1]).value - 1) < 1e-12

    def test_lhs_aniso_normalization(self, aniso):
        lo, hi, tail = aniso.normalization_box(1.0)
        r = coarea_lhs(lambda X: aniso.density(1.0, X), lo, hi)
        assert abs(r.value - 1) < 1e-6 and tail < 1e-14

    def test_identity_rhs(self):
        r = verify_coarea("identity")
        assert abs(r.rhs - (1 - math.exp(-40))) < 1e-9

    def test_rhs_aniso(self, aniso):
        r = coarea_rhs(aniso.estimator_map(), lambda X: aniso.density(1.0, X), (0.0, 60.0))
        assert abs(r.value - 1) < 1e-6

    def test_annulus_lhs_against_scipy(self):
        # independent polar integral of Jf = 2 sqrt(x1^2 + 16 x2^2) over 0.5 <= r <= 1
        f = lambda r, p: 2 * math.sqrt((r * math.cos(p)) ** 2 + 16 * (r * math.sin(p)) ** 2) * r
        expected, _ = si.dblquad(f, 0, 2 * math.pi, 0.5, 1.0, epsabs=1e-12, epsrel=1e-12)
        r = verify_coarea("annulus-measure")
        assert r.lhs == pytest.approx(expected, rel=1e-10)


class TestCases:
    @pytest.mark.parametrize("name", case_ids())
    def test_registered_cases_pass(self, name):
        report = verify_coarea(name)
        assert report.passed, report.to_dict()
        assert math.isfinite(report.abs_residual) and math.isfinite(report.rel_residual)

    def test_expected_values(self):
        assert verify_coarea("exponential-band").lhs == pytest.approx(4 * math.exp(-2), abs=1e-9)
        assert verify_coarea("ellipse").rel_residual < 1e-6

    @pytest.mark.parametrize("name", ["naive-ellipse", "naive-exponential"])
    def test_naive_decomposition_vanishes(self, name):
        r = verify_coarea(name)
        assert r.rhs == 0.0 and r.lhs > 0.9
