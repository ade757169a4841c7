"""Complexity of continuous models, in parameter space and in data space.

Parameter-space route: integrate the diagonal of the estimator density,
``g(theta) = p[est # mu_theta](theta)``, against the luckiness. Data-space
route: integrate the plug-in likelihood ``p(theta_hat(x), x) v(theta_hat(x))``
over a truncated data box. The two must agree. The estimator density comes
from a closed form or from a fiber integral over charts; a sampled histogram
exists only as a cross-check.
"""

from dataclasses import dataclass, field
import math
from typing import Optional

import numpy as np
from scipy import special

from .errors import InfiniteCompError, NoChartError
from .geometry import check_ess_inf, fiber_integral, sample_box
from .luckiness import Luckiness
from .models import default_base, log_max_likelihood
from .quadrature import (
    IntegralResult,
    QuadratureSpec,
    adaptive_integrate_1d,
    grid_integrate,
    iterated_integrate,
    qmc_integrate,
)

SOURCE_KINDS = ("closed-form", "coarea-chart", "mc-histogram")
SCAN_POINTS = 256
BISECT_STEPS = 60


# -- estimator density -------------------------------------------------------------

@dataclass(frozen=True)
class EstimatorPdfSource:
    """Where estimator densities come from.

    ``mc-histogram`` counts sampled estimates in a bin centred on the
    evaluation point. Its width is ``bin_width`` if given, else
    ``3.5 * sd * n ** (-1/5)``: the exponent that balances bias and variance
    for a single bin (the familiar ``-1/3`` balances them over a whole
    histogram and leaves ~1% noise per bin at 10^6 samples).
    """

    kind: str = "closed-form"
    samples: int = 10**6
    bin_width: Optional[float] = None
    seed: int = 0
    inner: QuadratureSpec = field(default_factory=lambda: QuadratureSpec(tolerance=1e-12))

    def __post_init__(self):
        if self.kind not in SOURCE_KINDS:
            raise ValueError(f"estimator density source must be one of {SOURCE_KINDS}")
        if self.samples < 2:
            raise ValueError("need at least 2 samples")
        if self.bin_width is not None and not self.bin_width > 0:
            raise ValueError("bin width must be > 0")

    @property
    def oracle_only(self):
        return self.kind == "mc-histogram"


def _histogram_density(estimates, theta_eval, width):
    est = np.sort(estimates)
    lo = np.searchsorted(est, theta_eval - 0.5 * width, side="left")
    hi = np.searchsorted(est, theta_eval + 0.5 * width, side="right")
    return (hi - lo) / (est.size * width)


def estimator_pdf(model, theta_source, theta_eval, source=None, estimator=None):
    """Density at ``theta_eval`` of the estimator under data from ``theta_source``.

    ``estimator`` (an :class:`~nmlcomp.geometry.EstimatorMap`) defaults to the
    model's own MLE map; the closed form exists only for that default.
    ``theta_eval`` may be an array of evaluation points.
    """
    source = source or EstimatorPdfSource()
    scalar = np.ndim(theta_eval) == 0
    T = np.atleast_1d(np.asarray(theta_eval, dtype=float))
    if source.kind == "closed-form":
        if estimator is not None:
            raise NoChartError("closed forms exist only for the model's own estimator")
        out = np.asarray(model.pushforward_pdf(theta_source, T), dtype=float)
    elif source.kind == "coarea-chart":
        fmap = estimator or model.estimator_map()
        h = lambda X: model.density(theta_source, X)
        out = np.array([fiber_integral(fmap, h, t, source.inner).value for t in T])
    else:
        fmap = estimator or (lambda X: model.mle_batch(X))
        X = model.sample(theta_source, source.seed, source.samples)
        est = np.asarray(fmap(X), dtype=float)[:, 0]
        width = source.bin_width or 3.5 * float(np.std(est)) * source.samples ** (-0.2)
        out = _histogram_density(est, T, width)
    return float(out[0]) if scalar else out


def diagonal(model, source=None, estimator=None):
    """``g(theta)``: the estimator density with source and evaluation tied
    together, as a one-argument vectorized function."""
    source = source or EstimatorPdfSource()

    def g(T):
        T = np.atleast_1d(np.asarray(T, dtype=float))
        if source.kind == "closed-form" and estimator is None:
            return np.asarray(model.pushforward_pdf(T, T), dtype=float)
        return np.array([estimator_pdf(model, t, t, source, estimator) for t in T])

    return g


# -- reports ------------------------------------------------------------------------

@dataclass
class CompReport:
    value: float
    method: str
    error_estimate: float = 0.0
    base: float = math.e
    nodes_used: int = 0
    residual: Optional[float] = None
    diagnostic: Optional[str] = None
    luckiness: str = "one"
    model: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if math.isnan(self.value) or self.value < 0:
            raise ValueError("complexity must be a nonnegative number")
        if not math.isfinite(self.error_estimate):
            raise ValueError("error estimate must be finite")

    @property
    def log_value(self):
        if self.value == 0:
            return -math.inf
        return math.log(self.value) / math.log(self.base)

    @property
    def finite(self):
        return math.isfinite(self.value)

    def to_dict(self):
        return {
            "model": self.model,
            "luckiness": self.luckiness,
            "method": self.method,
            "comp": self.value,
            "log_comp": self.log_value,
            "base": self.base,
            "error_estimate": self.error_estimate,
            "nodes_used": self.nodes_used,
            "residual": self.residual,
            "diagnostic": self.diagnostic,
            "details": self.details,
        }


def _divergent(model, v, method, exc, base):
    return CompReport(math.inf, method, 0.0, base, diagnostic=str(exc), luckiness=v.ident,
                      model=model.describe(), details=dict(exc.details))


# -- parameter-space route ----------------------------------------------------------

def _tail_ratio(q):
    # q samples dist * g along a sequence approaching the end; integrable
    # ends drive it to 0, a 1/dist (or worse) singularity keeps it flat
    return not q[-1] < 1e-3 * max(float(np.max(q)), 1e-300)


def _prescan(g, lo, hi, check_lo, check_hi):
    """Integrability scan toward the flagged ends of ``[lo, hi]``.

    Returns a diagnostic string when ``g`` does not decay faster than
    ``1/dist`` toward a flagged end, else ``None``.
    """
    steps = 10.0 ** np.arange(2, 13)
    problems = []
    if check_hi:
        if math.isinf(hi):
            T = steps * max(1.0, abs(lo) if math.isfinite(lo) else 1.0)
            if _tail_ratio(T * g(T)):
                problems.append("theta * g(theta) does not vanish as theta -> inf")
        else:
            d = max(1.0, abs(hi)) / steps
            if _tail_ratio(d * g(hi - d)):
                problems.append(f"g is not integrable at theta = {hi}")
    if check_lo:
        if math.isinf(lo):
            T = -steps * max(1.0, abs(hi) if math.isfinite(hi) else 1.0)
            if _tail_ratio(-T * g(T)):
                problems.append("|theta| * g(theta) does not vanish as theta -> -inf")
        else:
            d = max(1.0, abs(lo)) / steps
            if _tail_ratio(d * g(lo + d)):
                problems.append(f"g is not integrable at theta = {lo}")
    return "; ".join(problems) or None


def lmc_gfunction(model, v=None, source=None, quad=None, estimator=None, base=None):
    """Complexity as the integral of ``g(theta) v(theta)`` over the luckiness
    support (one-parameter models)."""
    v = v or Luckiness()
    source = source or EstimatorPdfSource()
    quad = quad or QuadratureSpec(tolerance=1e-11)
    base = default_base(model) if base is None else base
    if model.K != 1:
        raise NotImplementedError("the parameter-space route supports K = 1")
    if source.oracle_only:
        raise ValueError("the histogram density is an oracle and never feeds reported values")
    ps = model.param_space
    lo, hi = (float(e[0]) for e in v.support(ps.lower, ps.upper))
    if not lo < hi:
        return CompReport(0.0, "gfunction", 0.0, base, luckiness=v.ident, model=model.describe())
    g = diagonal(model, source, estimator)
    if source.kind == "coarea-chart":
        fmap = estimator or model.estimator_map()
        box_lo, box_hi, _ = model.data_box(v) if _bounded(v) else model.normalization_box(0.5 * (lo + hi))
        check_ess_inf(fmap, points=sample_box(box_lo, box_hi))

    w = lambda T: g(T) * v(T[:, None])
    singular_lo = math.isinf(lo) or (lo == ps.lower[0] and ps.open_lower)
    singular_hi = math.isinf(hi) or (hi == ps.upper[0] and ps.open_upper)
    if singular_lo or singular_hi:
        with np.errstate(all="ignore"):
            msg = _prescan(w, lo, hi, singular_lo, singular_hi)
        if msg:
            return CompReport(math.inf, "gfunction", 0.0, base, diagnostic=f"divergent: {msg}",
                              luckiness=v.ident, model=model.describe())

    if math.isinf(lo) or math.isinf(hi):
        res = _integrate_unbounded(w, lo, hi, quad.tolerance)
    else:
        res = adaptive_integrate_1d(w, lo, hi, quad.tolerance, quad.rel_tolerance)
    return CompReport(res.value, "gfunction", res.error_estimate, base, res.nodes_used,
                      luckiness=v.ident, model=model.describe(),
                      details={"source": source.kind, "support": [lo, hi]})


def _bounded(v):
    return v.kind == "indicator-box" and all(map(math.isfinite, v.lower + v.upper))


def _integrate_unbounded(w, lo, hi, tol):
    # theta = c + t / (1 - t) on (0, 1), mirrored for the lower end
    if math.isinf(lo) and math.isinf(hi):
        a = adaptive_integrate_1d(lambda t: w(-t / (1 - t)) / (1 - t) ** 2, 0.0, 1.0, tol / 2)
        b = adaptive_integrate_1d(lambda t: w(t / (1 - t)) / (1 - t) ** 2, 0.0, 1.0, tol / 2)
        return IntegralResult(a.value + b.value, a.error_estimate + b.error_estimate,
                              a.nodes_used + b.nodes_used, "adaptive-1d")
    if math.isinf(hi):
        return adaptive_integrate_1d(lambda t: w(lo + t / (1 - t)) / (1 - t) ** 2, 0.0, 1.0, tol)
    return adaptive_integrate_1d(lambda t: w(hi - t / (1 - t)) / (1 - t) ** 2, 0.0, 1.0, tol)


# -- data-space route ---------------------------------------------------------------

def plugin_integrand(model, v):
    """``x -> p(theta_hat(x), x) v(theta_hat(x))``, vectorized over rows."""

    def h(X):
        w = v(model.mle_batch(X))
        out = np.zeros(w.shape)
        live = w > 0
        # zero weight wins over a degenerate (infinite) plug-in value
        with np.errstate(divide="ignore", over="ignore"):
            out[live] = np.exp(model.plugin_log_density(X[live])) * w[live]
        return out

    return h


def level_crossing_breaks(estimate, levels, lo, hi, n_scan=SCAN_POINTS):
    """Breakpoint finder for the innermost axis of an iterated integral.

    For each prefix row (the outer coordinates) the scalar estimate is scanned
    along the last axis on ``n_scan`` points; every sign change of
    ``estimate - level`` is then bisected to full precision. Returns
    ``(M, B)`` with NaN padding, as :func:`iterated_integrate` expects.
    """
    levels = np.asarray(levels, dtype=float)
    grid = np.linspace(lo, hi, n_scan)

    def evaluate(prefix, t):
        # prefix (M, P), t (M, Q) -> estimate (M, Q)
        M, Q = t.shape
        X = np.concatenate([np.repeat(prefix, Q, axis=0), t.reshape(-1, 1)], axis=1)
        return np.asarray(estimate(X), dtype=float).reshape(M, Q)

    def breaks(prefix):
        M = prefix.shape[0]
        t = np.broadcast_to(grid, (M, n_scan))
        vals = evaluate(prefix, t)
        out = []
        for level in levels:
            d = vals - level
            sign_change = (d[:, :-1] < 0) != (d[:, 1:] < 0)
            rows, cols = np.nonzero(sign_change)
            if rows.size == 0:
                continue
            a = grid[cols].copy()
            b = grid[cols + 1].copy()
            fa = d[rows, cols] < 0
            for _ in range(BISECT_STEPS):
                mid = 0.5 * (a + b)
                fm = evaluate(prefix[rows], mid[:, None])[:, 0] - level < 0
                same = fm == fa
                a = np.where(same, mid, a)
                b = np.where(same, b, mid)
            col = np.full((M, n_scan), np.nan)
            col[rows, cols] = 0.5 * (a + b)
            out.append(col)
        if not out:
            return np.full((M, 1), np.nan)
        allb = np.concatenate(out, axis=1)
        allb = np.sort(allb, axis=1)  # NaNs sort last
        width = int(np.max(np.sum(~np.isnan(allb), axis=1), initial=1))
        return allb[:, : max(width, 1)]

    return breaks


def comp_bruteforce_continuous(model, v=None, quad=None, truncation=None, base=None):
    """Complexity as the data-space integral of the plug-in likelihood.

    ``quad.method`` ``auto`` picks nested adaptive quadrature with
    level-crossing breakpoints for D <= 3 and importance-sampled QMC beyond.
    """
    v = v or Luckiness()
    base = default_base(model) if base is None else base
    try:
        lower, upper, tail = model.data_box(v, truncation)
    except InfiniteCompError as exc:
        return _divergent(model, v, "brute", exc, base)
    h = plugin_integrand(model, v)
    D = lower.size
    # three nested adaptive levels cost ~10^7 nodes at 1e-7 and grow fast below
    quad = quad or QuadratureSpec(tolerance=1e-10 if D <= 2 else 1e-7)
    method = quad.method
    if method == "auto":
        method = "iterated" if D <= 3 else "qmc"
    if method in ("iterated", "adaptive-1d"):
        levels = model.break_levels(v)
        est = lambda X: model.mle_batch(X)[:, 0]
        breaks = level_crossing_breaks(est, levels, lower[-1], upper[-1]) if levels else None
        res = iterated_integrate(h, lower, upper, quad.tolerance, tail_bound=tail, breaks=breaks)
    elif method == "grid":
        res = grid_integrate(h, lower, upper, quad.resolution, tail_bound=tail)
    else:
        res = qmc_integrate(h, lower, upper, quad.budget, quad.replicates, quad.seed,
                            proposal=model.qmc_proposal(v), tail_bound=tail)
    return CompReport(res.value, "brute", res.error_estimate, base, res.nodes_used,
                      luckiness=v.ident, model=model.describe(),
                      details={"quadrature": res.method, "box": [lower.tolist(), upper.tolist()],
                               "tail_bound": tail})


def compare(model, v=None, source=None, g_quad=None, data_quad=None, truncation=None, base=None):
    """Both routes plus their residual: ``{"gfunction", "brute", "residual"}``."""
    g = lmc_gfunction(model, v, source, g_quad, base=base)
    b = comp_bruteforce_continuous(model, v, data_quad, truncation, base)
    residual = None
    if g.finite and b.finite:
        residual = abs(g.value - b.value) / max(abs(b.value), 1e-300)
    g.residual = b.residual = residual
    return {"gfunction": g, "brute": b, "residual": residual}


def g_curve(model, v=None, source=None, points=200, lower=None, upper=None):
    """``(theta, g(theta))`` rows over the luckiness support, for plotting."""
    v = v or Luckiness()
    ps = model.param_space
    lo, hi = (float(e[0]) for e in v.support(ps.lower, ps.upper))
    lo = lower if lower is not None else lo
    hi = upper if upper is not None else hi
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValueError("curve range must be finite; pass lower and upper")
    # midpoints keep open ends such as theta = 0 out of the table
    T = lo + (np.arange(points) + 0.5) / points * (hi - lo)
    return np.column_stack([T, diagonal(model, source)(T)])


def exponential_lmc_closed_form(N, theta_min, theta_max):
    """``N^N / Gamma(N) * exp(-N) * log(theta_max / theta_min)``."""
    if N < 1 or not 0 < theta_min <= theta_max:
        raise ValueError("need N >= 1 and 0 < theta_min <= theta_max")
    return math.exp(N * math.log(N) - math.lgamma(N) - N) * (math.log(theta_max) - math.log(theta_min))


def clamped_comp_closed_form(N, a, b):
    """Complexity of the exponential model restricted to ``[a, b]``.

    The atoms of the clipped mean at a and b carry ``P_a(mean <= a) +
    P_b(mean >= b) = 1`` in total; the interior adds the usual log term.
    """
    return 1.0 + exponential_lmc_closed_form(N, a, b)


# -- code lengths and selection -----------------------------------------------------

@dataclass
class NmlResult:
    l_ML: float
    log_comp: float
    l_NML: float
    base: float
    luckiness: str = "one"

    def to_dict(self):
        return {"l_ML": self.l_ML, "log_comp": self.log_comp, "l_NML": self.l_NML,
                "base": self.base, "luckiness": self.luckiness}


def _comp_value(comp):
    if isinstance(comp, (int, float)):
        return float(comp), "one"
    return float(comp.value), getattr(comp, "luckiness", "one")


def nml_code_length(model, x, comp, base=None):
    """``l_ML(x) + log_b Comp``."""
    b = default_base(model) if base is None else float(base)
    value, lid = _comp_value(comp)
    if not math.isfinite(value):
        raise InfiniteCompError("the complexity is infinite, so the NML code is undefined")
    if not value > 0:
        raise ValueError("complexity must be > 0")
    l_ml = log_max_likelihood(model, x, b)
    log_comp = math.log(value) / math.log(b)
    return NmlResult(l_ml, log_comp, l_ml + log_comp, b, lid)


def select_model(candidates, x, base=None, rel_tie=1e-12):
    """Index of the candidate ``(model, comp)`` with the shortest NML code
    for ``x``. ``x`` is one data point shared by all candidates or a list
    with one encoding per candidate. Ties go to the smaller complexity, then
    to the lower index."""
    if len(candidates) < 1:
        raise ValueError("need at least one candidate")
    xs = x if isinstance(x, (list, tuple)) and len(x) == len(candidates) and np.ndim(x[0]) >= 1 else [x] * len(candidates)
    lengths = [nml_code_length(m, xi, c, base).l_NML for (m, c), xi in zip(candidates, xs)]
    best = min(lengths)
    tied = [i for i, l in enumerate(lengths) if l <= best + rel_tie * max(1.0, abs(best))]
    return min(tied, key=lambda i: (_comp_value(candidates[i][1])[0], i))


def kraft_integral(model, comp, truncation, quad=None, base=None):
    """``int b^{-l_NML(x)} dx`` over ``[0, truncation]^D`` (nonnegative data)."""
    b = default_base(model) if base is None else float(base)
    value, _ = _comp_value(comp)
    quad = quad or QuadratureSpec(tolerance=1e-10)
    h = lambda X: np.exp(model.plugin_log_density(X)) / value
    D = model.D
    lower, upper = np.zeros(D), np.full(D, float(truncation))
    levels = model.break_levels(Luckiness())
    est = lambda X: model.mle_batch(X)[:, 0]
    breaks = level_crossing_breaks(est, levels, 0.0, float(truncation)) if levels else None
    if D <= 3:
        return iterated_integrate(h, lower, upper, quad.tolerance, breaks=breaks)
    return qmc_integrate(h, lower, upper, quad.budget, quad.replicates, quad.seed)
