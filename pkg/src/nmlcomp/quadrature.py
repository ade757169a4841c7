"""Numerical integration over boxes.

Four engines share one result type:

* :func:`grid_integrate` -- composite midpoint rule on a tensor grid, with a
  Richardson step from two resolutions (D <= 3).
* :func:`adaptive_integrate_1d` -- Gauss-Kronrod (G10/K21) with vectorized
  panel refinement.
* :func:`iterated_integrate` -- the 1-D adaptive rule nested per axis, for
  low-dimensional integrands with jumps (luckiness indicators) that defeat a
  fixed grid.
* :func:`qmc_integrate` -- scrambled Sobol' replicates, optionally mapped
  through per-axis proposal distributions.

Integrands are vectorized: ``f(X)`` with ``X`` of shape ``(M, D)`` returns
``(M,)`` (1-D integrands take and return flat arrays). Endpoints are never
evaluated, so integrable endpoint singularities are fine.
"""

from dataclasses import asdict, dataclass, field
import math

import numpy as np
from scipy.stats import qmc

from . import kernels
from .errors import BudgetExceededError, MaxDepthError, NonFiniteIntegrandError

MAX_GRID_NODES = 10**8
EPS = np.finfo(float).eps

METHODS = ("grid", "adaptive-1d", "iterated", "qmc", "auto")


@dataclass(frozen=True)
class QuadratureSpec:
    method: str = "auto"
    resolution: int = 512
    tolerance: float = 1e-10
    rel_tolerance: float = 0.0
    budget: int = 2**18
    replicates: int = 8
    tail_bound: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be > 0")
        if self.rel_tolerance < 0:
            raise ValueError("rel_tolerance must be >= 0")
        if self.resolution < 2:
            raise ValueError("resolution must be >= 2 per axis")
        if self.replicates < 2:
            raise ValueError("replicates must be >= 2")
        if self.budget < self.replicates:
            raise ValueError("budget must cover at least one node per replicate")
        if self.tail_bound < 0:
            raise ValueError("tail_bound must be >= 0")

    def replace(self, **changes):
        return QuadratureSpec(**{**asdict(self), **changes})

    def to_dict(self):
        return asdict(self)


@dataclass
class IntegralResult:
    value: float
    error_estimate: float
    nodes_used: int
    method: str = ""
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if not math.isfinite(self.error_estimate):
            raise NonFiniteIntegrandError("integration error estimate is not finite")


def _as_box(lower, upper):
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    if lower.shape != upper.shape or lower.ndim != 1:
        raise ValueError("lower/upper must be 1-D and of equal length")
    if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
        raise ValueError("integration box must be finite; truncate unbounded axes first")
    if np.any(upper <= lower):
        raise ValueError("box requires lower < upper on every axis")
    return lower, upper


def _check_finite(values):
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        bad = int(np.count_nonzero(~np.isfinite(values)))
        raise NonFiniteIntegrandError(f"integrand returned {bad} non-finite value(s)")
    return values


# -- grid ----------------------------------------------------------------------

def _midpoint_sum(f, lower, upper, n, chunk_rows):
    D = lower.size
    h = (upper - lower) / n
    axes = [lower[d] + (np.arange(n) + 0.5) * h[d] for d in range(D)]
    if D == 1:
        return kernels.compensated_sum(_check_finite(f(axes[0][:, None]))) * h[0]
    tail = np.stack(np.meshgrid(*axes[1:], indexing="ij"), axis=-1).reshape(-1, D - 1)
    rows_per_chunk = max(1, chunk_rows // tail.shape[0])
    partial = []
    for start in range(0, n, rows_per_chunk):
        first = axes[0][start:start + rows_per_chunk]
        X = np.empty((first.size * tail.shape[0], D))
        X[:, 0] = np.repeat(first, tail.shape[0])
        X[:, 1:] = np.tile(tail, (first.size, 1))
        partial.append(kernels.compensated_sum(_check_finite(f(X))))
    return math.fsum(partial) * float(np.prod(h))


def grid_integrate(f, lower, upper, resolution=512, extrapolate=True, tail_bound=0.0,
                   chunk_rows=1 << 20):
    """Composite midpoint rule at ``resolution`` and ``2 * resolution`` nodes per axis.

    With ``extrapolate`` the two sums are combined as ``(4*M2 - M1) / 3``;
    the error estimate is ``|M2 - M1| / 3`` plus ``tail_bound``.
    """
    lower, upper = _as_box(lower, upper)
    D = lower.size
    if D > 3:
        raise ValueError("grid quadrature supports D <= 3; use qmc for higher dimensions")
    n = int(resolution)
    nodes = n**D + (2 * n) ** D
    if nodes > MAX_GRID_NODES:
        raise BudgetExceededError(f"grid needs {nodes} nodes (> {MAX_GRID_NODES})")
    coarse = _midpoint_sum(f, lower, upper, n, chunk_rows)
    fine = _midpoint_sum(f, lower, upper, 2 * n, chunk_rows)
    err = abs(fine - coarse) / 3.0
    value = (4.0 * fine - coarse) / 3.0 if extrapolate else fine
    return IntegralResult(value, err + tail_bound, nodes, "grid",
                          {"coarse": coarse, "fine": fine})


# -- adaptive Gauss-Kronrod ----------------------------------------------------

_XGK = np.array([
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.0,
])
_WGK = np.array([
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077600725248877, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
])
_WG = np.array([
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
])

GK_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
GK_KRONROD = np.concatenate([_WGK[:-1], _WGK[::-1]])
GK_GAUSS = np.zeros(21)
GK_GAUSS[1:10:2] = _WG
GK_GAUSS[11:20:2] = _WG[::-1]


def _gk_panels(g, owner, lo, hi):
    mid = 0.5 * (lo + hi)
    hw = 0.5 * (hi - lo)
    x = mid[:, None] + hw[:, None] * GK_NODES[None, :]
    vals = _check_finite(g(np.repeat(owner, 21), x.ravel())).reshape(-1, 21)
    kron = vals @ GK_KRONROD * hw
    gauss = vals @ GK_GAUSS * hw
    resabs = np.abs(vals) @ GK_KRONROD * np.abs(hw)
    mean = kron / np.where(hw == 0, 1.0, hw) * 0.5
    resasc = np.abs(vals - mean[:, None]) @ GK_KRONROD * np.abs(hw)
    err = np.abs(kron - gauss)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = resasc * np.minimum(1.0, (200.0 * err / resasc) ** 1.5)
    err = np.where((resasc != 0) & (err != 0), scaled, err)
    floor = 50.0 * EPS * resabs
    return kron, np.maximum(err, floor), floor


def _seed_panels(a, b, breakpoints):
    """Initial panels per owner, cut at the breakpoints lying inside ``(a, b)``.

    ``breakpoints`` has shape (M, B) (or (B,) for a single owner); NaN pads.
    """
    M = a.size
    bp = np.asarray(breakpoints, dtype=float)
    if bp.ndim == 1:
        bp = np.broadcast_to(bp, (M, bp.size))
    bp = np.where((bp > a[:, None]) & (bp < b[:, None]), bp, np.nan)
    cuts = np.sort(np.concatenate([a[:, None], bp, b[:, None]], axis=1), axis=1)
    left, right = cuts[:, :-1], cuts[:, 1:]
    ok = np.isfinite(left) & np.isfinite(right) & (right > left)
    owner = np.nonzero(ok)[0].astype(np.int64)
    return left[ok], right[ok], owner


def _adaptive_batch(g, a, b, tol, max_depth=60, breakpoints=None):
    """Integrate ``g(owner, x)`` over ``[a[i], b[i]]`` for every owner ``i``.

    Globally adaptive: all panels are kept, and while an owner's summed error
    exceeds ``tol[i]`` its panels carrying more than an even share of that
    tolerance are bisected. Panels already at the roundoff floor are frozen.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    M = a.size
    tol = np.broadcast_to(np.asarray(tol, dtype=float), (M,)).copy()
    if breakpoints is not None:
        lo, hi, owner = _seed_panels(a, b, breakpoints)
    else:
        lo, hi = a.copy(), b.copy()
        owner = np.arange(M, dtype=np.int64)
    min_width = np.abs(b - a) * 2.0 ** (-max_depth)
    kron, err, floor = _gk_panels(g, owner, lo, hi)
    evals = 21 * lo.size
    while True:
        total = np.bincount(owner, weights=err, minlength=M)
        count = np.bincount(owner, minlength=M)
        busy = total > tol
        if not np.any(busy):
            break
        share = tol / (2.0 * np.maximum(count, 1))
        split = busy[owner] & (err > share[owner]) & (err > floor * (1 + 1e-12))
        if not np.any(split):
            # everything left sits at the roundoff floor; more bisection cannot help
            break
        if np.any(np.abs(hi[split] - lo[split]) <= min_width[owner[split]]):
            raise MaxDepthError(f"adaptive quadrature exceeded {max_depth} bisection levels")
        o, l, h = owner[split], lo[split], hi[split]
        m = 0.5 * (l + h)
        no = np.concatenate([o, o])
        nl = np.concatenate([l, m])
        nh = np.concatenate([m, h])
        nk, ne, nf = _gk_panels(g, no, nl, nh)
        evals += 21 * nl.size
        keep = ~split
        owner = np.concatenate([owner[keep], no])
        lo = np.concatenate([lo[keep], nl])
        hi = np.concatenate([hi[keep], nh])
        kron = np.concatenate([kron[keep], nk])
        err = np.concatenate([err[keep], ne])
        floor = np.concatenate([floor[keep], nf])
    error = np.bincount(owner, weights=err, minlength=M)
    if M == 1:
        order = np.argsort(lo, kind="stable")
        value = np.array([kernels.compensated_sum(kron[order])])
    else:
        order = np.lexsort((lo, owner))
        value = np.bincount(owner[order], weights=kron[order], minlength=M)
    return value, error, evals


def adaptive_integrate_1d(f, a, b, tol=1e-10, rel_tol=0.0, breakpoints=None, max_depth=60):
    """Adaptive G10/K21 integration of a vectorized ``f`` over ``[a, b]``.

    ``breakpoints`` inside the interval (kinks, jumps) seed the initial panels.
    Raises :class:`MaxDepthError` past ``max_depth`` bisections.
    """
    a, b = float(a), float(b)
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError("interval must be finite")
    if a == b:
        return IntegralResult(0.0, 0.0, 0, "adaptive-1d")
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    bp = None if breakpoints is None else np.asarray(breakpoints, dtype=float)
    g = lambda owner, x: f(x)
    if rel_tol > 0:
        rough, _, _ = _gk_panels(g, np.zeros(1, dtype=np.int64), np.array([a]), np.array([b]))
        tol = max(tol, rel_tol * abs(float(rough[0])))
    value, error, evals = _adaptive_batch(g, np.array([a]), np.array([b]), tol, max_depth, bp)
    return IntegralResult(sign * float(value[0]), float(error[0]), evals, "adaptive-1d")


def iterated_integrate(f, lower, upper, tol=1e-9, inner_factor=1e-2, tail_bound=0.0,
                       breaks=None):
    """Nested adaptive Gauss-Kronrod over a box, vectorized across outer nodes.

    Inner integrals get ``inner_factor * tol / outer_volume`` so their noise
    stays below the outer tolerance. Jumps of ``f`` along the innermost axis
    must be announced through ``breaks(prefix)``, which maps the fixed outer
    coordinates (M, D-1) to candidate jump positions (M, B): a jump hidden in
    a panel's end sliver is invisible to both rules of the pair.
    """
    lower, upper = _as_box(lower, upper)
    D = lower.size
    widths = upper - lower
    counter = {"evals": 0}

    def level(prefix, axis, tol_axis):
        M = prefix.shape[0]
        if axis == D - 1:
            def g(owner, x):
                X = np.empty((x.size, D))
                X[:, :axis] = prefix[owner]
                X[:, axis] = x
                return f(X)
        else:
            inner_tol = inner_factor * tol_axis / widths[axis]

            def g(owner, x):
                X = np.empty((x.size, axis + 1))
                X[:, :axis] = prefix[owner]
                X[:, axis] = x
                return level(X, axis + 1, inner_tol)
        bp = breaks(prefix) if (breaks is not None and axis == D - 1) else None
        value, _, evals = _adaptive_batch(
            g, np.full(M, lower[axis]), np.full(M, upper[axis]), tol_axis, breakpoints=bp)
        counter["evals"] += evals
        return value

    bp = breaks(np.empty((1, 0))) if (breaks is not None and D == 1) else None
    value, error, evals = _adaptive_batch(
        (lambda owner, x: f(x[:, None])) if D == 1 else
        (lambda owner, x: level(x[:, None], 1, inner_factor * tol / widths[0])),
        lower[:1], upper[:1], tol, breakpoints=bp)
    counter["evals"] += evals
    return IntegralResult(float(value[0]), float(error[0]) + tail_bound,
                          counter["evals"], "iterated")


# -- quasi-Monte Carlo ------------------------------------------------------------

def qmc_integrate(f, lower, upper, budget=2**18, replicates=8, seed=0, proposal=None,
                  tail_bound=0.0):
    """Randomized QMC: ``replicates`` independently scrambled Sobol' point sets.

    Without ``proposal`` each replicate is the node average times the box
    volume. ``proposal`` is a sequence of frozen 1-D ``scipy.stats``
    distributions, one per axis; nodes are pushed through their inverse CDF
    restricted to the box and weighted by the inverse truncated density, which
    integrates the same function over the same box with lower variance when
    the mass is concentrated. The error estimate is the standard error across
    replicates.
    """
    lower, upper = _as_box(lower, upper)
    D = lower.size
    per = 1 << max(1, int(math.floor(math.log2(budget / replicates))))
    streams = np.random.SeedSequence(seed).spawn(replicates)
    if proposal is not None:
        if len(proposal) != D:
            raise ValueError("need one proposal distribution per axis")
        cdf_lo = np.array([p.cdf(lo) for p, lo in zip(proposal, lower)])
        cdf_hi = np.array([p.cdf(hi) for p, hi in zip(proposal, upper)])
        mass = cdf_hi - cdf_lo
    estimates = []
    for stream in streams:
        u = qmc.Sobol(d=D, scramble=True, seed=np.random.default_rng(stream)).random_base2(
            int(math.log2(per)))
        if proposal is None:
            X = lower + u * (upper - lower)
            w = float(np.prod(upper - lower))
            estimates.append(kernels.compensated_sum(_check_finite(f(X))) * w / per)
        else:
            X = np.empty_like(u)
            logw = np.zeros(per)
            for d, p in enumerate(proposal):
                X[:, d] = np.clip(p.ppf(cdf_lo[d] + u[:, d] * mass[d]), lower[d], upper[d])
                logw += math.log(mass[d]) - p.logpdf(X[:, d])
            vals = _check_finite(f(X))
            contrib = np.where(vals == 0.0, 0.0, vals * np.exp(logw))
            estimates.append(kernels.compensated_sum(_check_finite(contrib)) / per)
    estimates = np.array(estimates)
    value = math.fsum(estimates) / replicates
    err = float(np.std(estimates, ddof=1) / math.sqrt(replicates))
    return IntegralResult(value, err + tail_bound, per * replicates, "qmc",
                          {"replicates": estimates.tolist()})


def integrate(f, lower, upper, spec):
    """Dispatch on ``spec.method``; ``auto`` picks iterated (D <= 2), grid (D = 3)
    or qmc (D > 3)."""
    lower, upper = _as_box(lower, upper)
    D = lower.size
    method = spec.method
    if method == "auto":
        method = "iterated" if D <= 2 else ("grid" if D == 3 else "qmc")
    if method == "grid":
        return grid_integrate(f, lower, upper, spec.resolution, tail_bound=spec.tail_bound)
    if method == "adaptive-1d":
        if D != 1:
            raise ValueError("adaptive-1d needs a 1-D box")
        res = adaptive_integrate_1d(lambda x: f(x[:, None]), lower[0], upper[0],
                                    spec.tolerance, spec.rel_tolerance)
        res.error_estimate += spec.tail_bound
        return res
    if method == "iterated":
        return iterated_integrate(f, lower, upper, spec.tolerance, tail_bound=spec.tail_bound)
    return qmc_integrate(f, lower, upper, spec.budget, spec.replicates, spec.seed,
                         tail_bound=spec.tail_bound)
