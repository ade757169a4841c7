"""Level-set integration and the two sides of the coarea identity.

Fibers ``f^{-1}({t})`` of an estimator map are handled only through explicit
charts: a parametrization ``gamma: U -> R^D`` of a (D-K)-dimensional piece of
the fiber over a box ``U``. The (D-K)-dimensional Hausdorff integral of ``g``
over a chart is ``int_U g(gamma(u)) sqrt(det(dgamma^T dgamma)) du``; over a
zero-dimensional chart (a finite point set) it is the plain sum.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import kernels
from .errors import (
    ChartInconsistentError,
    JacobianDegenerateError,
    NoChartError,
)
from .jacobian import JacobianProvider, jacobian_batch, nonsquare_det_batch, guarded_reciprocal
from .quadrature import (
    IntegralResult,
    QuadratureSpec,
    adaptive_integrate_1d,
    grid_integrate,
    iterated_integrate,
    qmc_integrate,
    integrate,
)

CHART_TOL = 1e-9
ESS_INF_FLOOR = 1e-12
ESS_INF_FRACTION = 0.9999


@dataclass(frozen=True)
class LevelSetChart:
    """One parametrized piece of a fiber.

    For ``dim == 0`` only ``points`` (P, D) is used. Otherwise ``param`` maps
    (M, dim) parameter rows to (M, D) data points over the box
    ``[lower, upper]``; ``tangent`` optionally returns the (M, D, dim)
    derivative, else it is taken by central differences.
    """

    level: np.ndarray
    dim: int
    param: Optional[Callable] = None
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    tangent: Optional[Callable] = None
    points: Optional[np.ndarray] = None
    periodic: bool = False

    def __post_init__(self):
        object.__setattr__(self, "level", np.atleast_1d(np.asarray(self.level, dtype=float)))
        if self.dim < 0:
            raise ValueError("chart dimension must be >= 0")
        if self.dim == 0:
            if self.points is None:
                raise ValueError("a 0-dimensional chart needs points")
            object.__setattr__(self, "points", np.atleast_2d(np.asarray(self.points, dtype=float)))
        else:
            if self.param is None or self.lower is None or self.upper is None:
                raise ValueError("a chart of positive dimension needs param plus lower and upper bounds")
            lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
            hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
            if lo.size != self.dim or hi.size != self.dim or np.any(hi <= lo):
                raise ValueError("chart box must have dim axes with lower < upper")
            object.__setattr__(self, "lower", lo)
            object.__setattr__(self, "upper", hi)

    def __call__(self, U):
        return np.asarray(self.param(np.atleast_2d(U)), dtype=float)

    def surface_element(self, U):
        """sqrt(det(dgamma^T dgamma)) at each row of ``U`` (M, dim)."""
        U = np.atleast_2d(U)
        if self.tangent is not None:
            T = np.asarray(self.tangent(U), dtype=float)
        else:
            T = jacobian_batch(JacobianProvider(self.param), U)
        return nonsquare_det_batch(np.swapaxes(T, 1, 2))

    def sample(self, n, rng):
        if self.dim == 0:
            return self.points
        U = self.lower + rng.random((n, self.dim)) * (self.upper - self.lower)
        return self(U)


def _as_atlas(charts):
    if isinstance(charts, LevelSetChart):
        return [charts]
    return list(charts)


@dataclass(frozen=True)
class EstimatorMap:
    """A Lipschitz map from data to parameters with Jacobian and fiber charts.

    ``charts(level)`` returns a list of :class:`LevelSetChart` covering
    ``fn^{-1}({level})`` up to a null set.
    """

    fn: Callable
    jacobian: JacobianProvider
    chart_factory: Optional[Callable] = None
    name: str = "estimator"

    def __call__(self, X):
        out = np.asarray(self.fn(np.atleast_2d(X)), dtype=float)
        return out.reshape(out.shape[0], -1)

    def jdet(self, X):
        return nonsquare_det_batch(jacobian_batch(self.jacobian, np.atleast_2d(X)))

    def charts(self, level):
        if self.chart_factory is None:
            raise NoChartError(f"{self.name} has no fiber charts")
        return _as_atlas(self.chart_factory(level))


def check_chart(charts, fmap, n=1000, seed=0, tol=CHART_TOL):
    """Raise :class:`ChartInconsistentError` unless ``fmap`` maps sampled chart
    points back to the chart level within ``tol``."""
    rng = np.random.default_rng(seed)
    for chart in _as_atlas(charts):
        X = chart.sample(n, rng)
        got = fmap(X)
        dev = float(np.max(np.abs(got - chart.level[None, :]))) if X.size else 0.0
        if not dev <= tol * max(1.0, float(np.max(np.abs(chart.level)))):
            raise ChartInconsistentError(
                f"chart at level {chart.level.tolist()} is off its fiber by {dev:.3g}")


def hausdorff_integral(charts, g, quad=None, fmap=None):
    """Integral of ``g`` (vectorized over (M, D) rows) over the charted fiber
    with respect to (D-K)-dimensional Hausdorff measure.

    Passing ``fmap`` runs :func:`check_chart` first.
    """
    quad = quad or QuadratureSpec(tolerance=1e-12)
    atlas = _as_atlas(charts)
    if fmap is not None:
        check_chart(atlas, fmap)
    values, errors, nodes = [], [], 0
    for chart in atlas:
        if chart.dim == 0:
            vals = np.asarray(g(chart.points), dtype=float)
            if not np.all(np.isfinite(vals)):
                from .errors import NonFiniteIntegrandError
                raise NonFiniteIntegrandError("integrand is not finite on the fiber")
            values.append(kernels.compensated_sum(vals))
            errors.append(0.0)
            nodes += vals.size
            continue

        def integrand(U, chart=chart):
            return np.asarray(g(chart(U)), dtype=float) * chart.surface_element(U)

        if chart.dim == 1 and not chart.periodic and quad.method in ("auto", "adaptive-1d", "iterated"):
            res = adaptive_integrate_1d(lambda u: integrand(u[:, None]), chart.lower[0],
                                        chart.upper[0], quad.tolerance)
        elif chart.dim <= 3 and quad.method != "qmc":
            res = grid_integrate(integrand, chart.lower, chart.upper, quad.resolution)
        else:
            res = qmc_integrate(integrand, chart.lower, chart.upper, quad.budget,
                                quad.replicates, quad.seed)
        values.append(res.value)
        errors.append(res.error_estimate)
        nodes += res.nodes_used
    return IntegralResult(float(np.sum(values)), float(np.sum(errors)), nodes, "hausdorff")


def coarea_lhs(h, lower, upper, quad=None, breaks=None):
    """Lebesgue integral of ``h`` over the data box ``[lower, upper]``."""
    quad = quad or QuadratureSpec()
    if quad.method in ("auto", "iterated") and np.size(lower) <= 2:
        return iterated_integrate(h, lower, upper, quad.tolerance, tail_bound=quad.tail_bound,
                                  breaks=breaks)
    return integrate(h, lower, upper, quad)


def check_ess_inf(fmap, interval=None, points=None, n_levels=100, per_level=100, seed=0):
    """Require the Jacobian factor to exceed ``ESS_INF_FLOOR`` at >= 99.99% of
    10^4 sample points.

    ``points`` (data-space nodes) takes precedence; otherwise fiber points are
    drawn at ``n_levels`` stratified levels across ``interval``.
    """
    if points is None:
        rng = np.random.default_rng(seed)
        lo, hi = float(interval[0]), float(interval[1])
        levels = lo + (np.arange(n_levels) + rng.random(n_levels)) / n_levels * (hi - lo)
        pts = [chart.sample(per_level, rng) for t in levels for chart in fmap.charts(t)]
        points = np.concatenate(pts, axis=0)
    J = fmap.jdet(points)
    frac = float(np.mean(J > ESS_INF_FLOOR))
    if frac < ESS_INF_FRACTION:
        raise JacobianDegenerateError(
            f"Jacobian factor <= {ESS_INF_FLOOR} at {100 * (1 - frac):.3g}% of sampled nodes",
            fraction=frac)
    return frac


def sample_box(lower, upper, n=10_000, seed=0):
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    return lower + np.random.default_rng(seed).random((n, lower.size)) * (upper - lower)


def fiber_integral(fmap, h, level, inner=None, check=True):
    """Inner integral of the coarea identity at one level:
    ``int_{f^{-1}(level)} h(x) / Jf(x) dH^{D-K}``."""
    charts = fmap.charts(level)
    if check:
        check_chart(charts, fmap)

    def g(X):
        return np.asarray(h(X), dtype=float) * guarded_reciprocal(fmap.jdet(X))

    return hausdorff_integral(charts, g, inner)


def coarea_rhs(fmap, h, interval, quad=None, inner=None, breakpoints=None, check=True,
               ess_points=None):
    """Iterated integral over levels ``t`` in ``interval`` of the fiber integrals.

    K = 1 uses adaptive Gauss-Kronrod over ``interval = (lo, hi)``; K >= 2
    takes ``interval = (lower_vec, upper_vec)`` and a fixed grid. With
    ``check``, the Jacobian lower bound is tested on ``ess_points`` (data-space
    nodes) or else on fiber samples.
    """
    quad = quad or QuadratureSpec(tolerance=1e-8)
    inner = inner or QuadratureSpec(tolerance=1e-12)
    lo = np.atleast_1d(np.asarray(interval[0], dtype=float))
    hi = np.atleast_1d(np.asarray(interval[1], dtype=float))
    if check and (ess_points is not None or lo.size == 1):
        check_ess_inf(fmap, (lo[0], hi[0]), points=ess_points)
    counter = {"nodes": 0}

    def outer(T):
        T = np.atleast_2d(T)
        out = np.empty(T.shape[0])
        for i, t in enumerate(T):
            res = fiber_integral(fmap, h, t if t.size > 1 else float(t[0]), inner, check=False)
            out[i] = res.value
            counter["nodes"] += res.nodes_used
        return out

    if lo.size == 1:
        res = adaptive_integrate_1d(lambda t: outer(t[:, None]), lo[0], hi[0], quad.tolerance,
                                    breakpoints=breakpoints)
    else:
        res = grid_integrate(outer, lo, hi, quad.resolution)
    res.details["inner_nodes"] = counter["nodes"]
    res.method = "coarea"
    return res


def naive_fiber_integral(fmap, h, level, lower, upper, resolution=64):
    """The flawed decomposition: a D-dimensional Lebesgue integral of ``h`` over
    the fiber itself, taken on a midpoint grid of the data box via the fiber's
    indicator. Fibers of positive codimension are Lebesgue-null, so this is 0
    for every level (up to grid nodes landing exactly on the fiber)."""
    level = np.atleast_1d(np.asarray(level, dtype=float))

    def indicator_h(X):
        on_fiber = np.all(fmap(X) == level[None, :], axis=1)
        return np.where(on_fiber, np.asarray(h(X), dtype=float), 0.0)

    return grid_integrate(indicator_h, lower, upper, resolution, extrapolate=False).value


@dataclass
class CoareaReport:
    case: str
    lhs: float
    rhs: float
    abs_residual: float
    rel_residual: float
    tolerance: float
    passed: bool
    kind: str = "equality"
    metadata: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "case": self.case,
            "kind": self.kind,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "abs_residual": self.abs_residual,
            "rel_residual": self.rel_residual,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "metadata": self.metadata,
        }


def make_report(case, lhs, rhs, tolerance, kind="equality", metadata=None):
    lhs_v = lhs.value if isinstance(lhs, IntegralResult) else float(lhs)
    rhs_v = rhs.value if isinstance(rhs, IntegralResult) else float(rhs)
    abs_res = abs(lhs_v - rhs_v)
    rel_res = abs_res / max(abs(lhs_v), abs(rhs_v), 1e-300)
    meta = dict(metadata or {})
    for side, res in (("lhs", lhs), ("rhs", rhs)):
        if isinstance(res, IntegralResult):
            meta[f"{side}_error_estimate"] = res.error_estimate
            meta[f"{side}_nodes"] = res.nodes_used
            meta[f"{side}_method"] = res.method
    if kind == "negative":
        passed = rhs_v == 0.0 and lhs_v > 0.9
    else:
        passed = rel_res < tolerance
    return CoareaReport(case, lhs_v, rhs_v, abs_res, rel_res, tolerance, passed, kind, meta)
