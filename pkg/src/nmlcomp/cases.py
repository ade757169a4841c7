"""Named two-sided checks of the coarea identity.

Each case computes the data-space side and the level-set side independently
and wraps them in a :class:`~nmlcomp.geometry.CoareaReport`. Negative cases
pair a correct data-space integral with the flawed decomposition that
integrates over fibers with D-dimensional Lebesgue measure.
"""

from dataclasses import dataclass
import math
from typing import Callable

import numpy as np

from .errors import ConfigError
from .geometry import (
    EstimatorMap,
    LevelSetChart,
    coarea_lhs,
    coarea_rhs,
    make_report,
    naive_fiber_integral,
)
from .jacobian import JacobianProvider
from .luckiness import Luckiness
from .models import AnisoGauss2D, Exponential
from .quadrature import (
    IntegralResult,
    QuadratureSpec,
    adaptive_integrate_1d,
    grid_integrate,
)

IDENTITY_CUTOFF = 40.0
ELLIPSE_LEVEL_CUTOFF = 60.0  # exp(-60) of the level mass lies beyond
ANNULUS_RADII = (0.5, 1.0)


@dataclass(frozen=True)
class CoareaCase:
    name: str
    run: Callable
    tolerance: float
    kind: str = "equality"
    description: str = ""


def _identity():
    fmap = EstimatorMap(
        lambda X: X[:, :1],
        JacobianProvider(lambda X: X[:, :1], "analytic", lambda X: np.ones((X.shape[0], 1, 1))),
        lambda t: [LevelSetChart([t], 0, points=[[t]])],
        "identity")
    h = lambda X: np.exp(-X[:, 0])
    lhs = coarea_lhs(h, [0.0], [IDENTITY_CUTOFF], QuadratureSpec(tolerance=1e-13))
    rhs = coarea_rhs(fmap, h, (0.0, IDENTITY_CUTOFF), QuadratureSpec(tolerance=1e-13))
    return lhs, rhs, {"expected": -math.expm1(-IDENTITY_CUTOFF)}


def _ellipse():
    model = AnisoGauss2D()
    fmap = model.estimator_map()
    h = lambda X: model.density(1.0, X)
    lo, hi, tail = model.normalization_box(1.0)
    lhs = coarea_lhs(h, lo, hi, QuadratureSpec(tolerance=1e-11, tail_bound=tail))
    rhs = coarea_rhs(fmap, h, (0.0, ELLIPSE_LEVEL_CUTOFF), QuadratureSpec(tolerance=1e-10))
    return lhs, rhs, {"expected": 1.0, "lhs_tail_bound": tail}


def _exponential_band():
    from .continuous import level_crossing_breaks, plugin_integrand

    model = Exponential(2)
    v = Luckiness.box([1.0], [math.e])
    h = plugin_integrand(model, v)
    lo, hi, _ = model.data_box(v)
    est = lambda X: model.mle_batch(X)[:, 0]
    lhs = coarea_lhs(h, lo, hi, QuadratureSpec(tolerance=1e-11),
                     breaks=level_crossing_breaks(est, [1.0, math.e], lo[-1], hi[-1]))
    rhs = coarea_rhs(model.estimator_map(), h, (1.0, math.e), QuadratureSpec(tolerance=1e-11))
    return lhs, rhs, {"expected": 4.0 * math.exp(-2.0)}


def _annulus_arcs(t):
    """Arcs of the ellipse x1^2 + 4 x2^2 = t inside the annulus, one per quadrant.

    On the chart ``s -> sqrt(t) (cos s, sin s / 2)`` the squared radius is
    ``t (1/4 + 3/4 cos^2 s)``; inside ``[r0^2, r1^2]`` that pins ``cos^2 s``
    to an interval, i.e. ``s`` to ``[s1, s2]`` in the first quadrant.
    """
    r0, r1 = ANNULUS_RADII
    c2_hi = np.clip((4.0 * r1**2 / t - 1.0) / 3.0, 0.0, 1.0)
    c2_lo = np.clip((4.0 * r0**2 / t - 1.0) / 3.0, 0.0, 1.0)
    s1, s2 = math.acos(math.sqrt(c2_hi)), math.acos(math.sqrt(c2_lo))
    if not s2 - s1 > 1e-15:
        return []
    r = math.sqrt(t)
    charts = []
    for sx, sy in ((1, 1), (-1, 1), (-1, -1), (1, -1)):
        charts.append(LevelSetChart(
            [t], 1,
            param=lambda U, sx=sx, sy=sy: np.column_stack(
                [sx * r * np.cos(U[:, 0]), sy * 0.5 * r * np.sin(U[:, 0])]),
            lower=[s1], upper=[s2],
            tangent=lambda U, sx=sx, sy=sy: np.stack(
                [-sx * r * np.sin(U[:, 0]), sy * 0.5 * r * np.cos(U[:, 0])], axis=1)[:, :, None]))
    return charts


def _annulus_measure():
    """Measure form: ``int_A Jf dx`` equals the integral over levels of the
    length of ``A`` cut by each fiber."""
    r0, r1 = ANNULUS_RADII
    base = AnisoGauss2D().estimator_map()
    fmap = EstimatorMap(base.fn, base.jacobian, _annulus_arcs, "quadratic-form|annulus")
    jf = lambda X: 2.0 * np.sqrt(X[:, 0] ** 2 + 16.0 * X[:, 1] ** 2)

    def inside(X):
        rr = X[:, 0] ** 2 + X[:, 1] ** 2
        return (rr >= r0**2) & (rr <= r1**2)

    h = lambda X: np.where(inside(X), jf(X), 0.0)

    # data side in polar coordinates, where the annulus is a box
    def polar(P):
        X = np.column_stack([P[:, 0] * np.cos(P[:, 1]), P[:, 0] * np.sin(P[:, 1])])
        return jf(X) * P[:, 0]

    lhs = grid_integrate(polar, [r0, 0.0], [r1, 2 * math.pi], 1024)
    t_lo, t_hi = r0**2, 4.0 * r1**2
    # the arc endpoints change regime where the ellipse's major axis meets r1
    rhs = coarea_rhs(fmap, h, (t_lo, t_hi), QuadratureSpec(tolerance=1e-9),
                     breakpoints=[r1**2, 4.0 * r0**2])
    return lhs, rhs, {"annulus": list(ANNULUS_RADII)}


def _naive(which):
    def run():
        if which == "ellipse":
            model = AnisoGauss2D()
            fmap = model.estimator_map()
            h = lambda X: model.density(1.0, X)
            lo, hi, tail = model.normalization_box(1.0)
            lhs = coarea_lhs(h, lo, hi, QuadratureSpec(tolerance=1e-11, tail_bound=tail))
            levels = (0.0, ELLIPSE_LEVEL_CUTOFF)
        else:
            model = Exponential(1)
            fmap = model.estimator_map()
            h = lambda X: model.density(1.0, X)
            lo, hi = np.zeros(1), np.full(1, IDENTITY_CUTOFF)
            lhs = coarea_lhs(h, lo, hi, QuadratureSpec(tolerance=1e-13))
            levels = (0.0, IDENTITY_CUTOFF)
        inner = lambda T: np.array([naive_fiber_integral(fmap, h, t, lo, hi) for t in T])
        rhs = adaptive_integrate_1d(inner, levels[0], levels[1], 1e-10)
        return lhs, rhs, {"decomposition": "lebesgue-on-fiber"}

    return run


CASES = {
    "identity": CoareaCase("identity", _identity, 1e-10,
                           description="f(x) = x on [0, 40], h = exp(-x)"),
    "ellipse": CoareaCase("ellipse", _ellipse, 1e-6,
                          description="aniso-gauss-2d estimator, h = density at theta = 1"),
    "exponential-band": CoareaCase("exponential-band", _exponential_band, 1e-5,
                                   description="sample mean of 2 draws, plug-in with luckiness [1, e]"),
    "annulus-measure": CoareaCase("annulus-measure", _annulus_measure, 1e-5,
                                  description="h = 1_annulus * Jf for the aniso estimator"),
    "naive-ellipse": CoareaCase("naive-ellipse", _naive("ellipse"), 0.0, "negative",
                                description="Lebesgue integral over ellipse fibers"),
    "naive-exponential": CoareaCase("naive-exponential", _naive("exponential"), 0.0, "negative",
                                    description="Lebesgue integral over one-point fibers"),
}


def case_ids():
    return list(CASES)


def verify_coarea(name):
    """Run a registered case; failures are data in the report."""
    if name not in CASES:
        raise ConfigError(f"unknown coarea case: {name}", "case")
    case = CASES[name]
    lhs, rhs, meta = case.run()
    meta["description"] = case.description
    return make_report(case.name, lhs, rhs, case.tolerance, case.kind, meta)
