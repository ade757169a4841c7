"""Parametric probabilistic models with closed-form maximum likelihood.

A model bundles its spaces and likelihood with a closed-form MLE and a
sampler. Optional structure such as a sufficient statistic or fiber charts
of the estimator map feeds the complexity engines.

Batched conventions: data ``X`` is ``(M, D)``, parameters are ``(M, K)`` (one
row per data row) or ``(K,)`` (shared by all rows). Scalars are accepted
where K = 1.
"""

from dataclasses import dataclass, field
from fractions import Fraction
import itertools
import math
from typing import Callable, Optional

import numpy as np
from scipy import special, stats

from .errors import (
    ConfigError,
    DegenerateMLEError,
    InfiniteCompError,
    NoChartError,
    NoClosedFormError,
    NoSufficientStatError,
    OutsideDataSpaceError,
    UnknownModelError,
)
from .geometry import EstimatorMap, LevelSetChart
from .jacobian import JacobianProvider
from .luckiness import Luckiness

DISCRETE = "discrete-enumerable"
CONTINUOUS = "continuous-box"

CHART_HALF_WIDTH = 12.0  # gauss-mean fiber charts: Gaussian tail beyond 12 sd is < 1e-32
GAUSS_PAD = 10.0  # gauss-mean data boxes extend the luckiness box by this much per axis


# -- spaces --------------------------------------------------------------------

@dataclass(frozen=True)
class DataSpace:
    """Discrete spaces are the product ``alphabet ** dimension``; continuous
    spaces are boxes whose infinite sides need a truncation policy before
    integration."""

    kind: str
    dimension: int
    lower: tuple = ()
    upper: tuple = ()
    alphabet: tuple = ()
    truncation: str = "none"

    def __post_init__(self):
        if self.kind not in (DISCRETE, CONTINUOUS):
            raise ValueError(f"unknown data-space kind {self.kind!r}")
        if self.dimension < 1:
            raise ValueError("data dimension must be >= 1")
        if self.kind == DISCRETE:
            if not self.alphabet or len(set(self.alphabet)) != len(self.alphabet):
                raise ValueError("discrete data space needs a nonempty alphabet without repeats")
        else:
            if len(self.lower) != self.dimension or len(self.upper) != self.dimension:
                raise ValueError("continuous data space needs per-axis bounds")
            if any(not lo < hi for lo, hi in zip(self.lower, self.upper)):
                raise ValueError("data bounds need lower < upper on every axis")

    @property
    def bounded(self):
        return self.kind == DISCRETE or all(map(math.isfinite, self.lower + self.upper))

    def size(self):
        if self.kind != DISCRETE:
            return math.inf
        return len(self.alphabet) ** self.dimension

    def enumerate(self):
        """Every data point exactly once, in lexicographic order."""
        if self.kind != DISCRETE:
            raise TypeError("only discrete data spaces are enumerable")
        return itertools.product(self.alphabet, repeat=self.dimension)

    def contains(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dimension:
            return np.zeros(X.shape[0], dtype=bool)
        if self.kind == DISCRETE:
            return np.all(np.isin(X, np.asarray(self.alphabet, dtype=float)), axis=1)
        return np.all((X >= np.array(self.lower)) & (X <= np.array(self.upper)), axis=1)


@dataclass(frozen=True)
class ParamSpace:
    dimension: int
    lower: tuple
    upper: tuple
    open_lower: bool = False
    open_upper: bool = False

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("parameter dimension must be >= 1")
        if len(self.lower) != self.dimension or len(self.upper) != self.dimension:
            raise ValueError("parameter space needs per-axis bounds")
        if any(not lo < hi for lo, hi in zip(self.lower, self.upper)):
            raise ValueError("parameter bounds need lower < upper on every axis")

    def contains(self, theta):
        T = np.atleast_2d(np.asarray(theta, dtype=float))
        lo, hi = np.array(self.lower), np.array(self.upper)
        ok_lo = T > lo if self.open_lower else T >= lo
        ok_hi = T < hi if self.open_upper else T <= hi
        return np.all(ok_lo & ok_hi, axis=1)


def _rows(X, D):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, D) if D > 1 or X.size == 1 else X[:, None]
    return X


def _params(theta, M, K):
    T = np.asarray(theta, dtype=float)
    if T.ndim == 0:
        T = T.reshape(1, 1)
    elif T.ndim == 1:
        T = T.reshape(1, K) if T.size == K else T.reshape(-1, K)
    if T.shape[0] == 1 and M != 1:
        T = np.broadcast_to(T, (M, K))
    return T


# -- base ----------------------------------------------------------------------

class ModelDescriptor:
    """Base class of zoo models. Subclasses are frozen dataclasses."""

    id = "abstract"
    discrete = False

    # structure
    data_space: DataSpace
    param_space: ParamSpace

    @property
    def D(self):
        return self.data_space.dimension

    @property
    def K(self):
        return self.param_space.dimension

    def params(self):
        return {}

    def describe(self):
        return {"id": self.id, **self.params()}

    # likelihood
    def log_density(self, theta, X):
        raise NotImplementedError

    def density(self, theta, X):
        return np.exp(self.log_density(theta, X))

    mass_or_density = density
    log_mass_or_density = log_density

    # maximum likelihood
    def mle_batch(self, X):
        """MLE per row; rows whose supremum sits on an open boundary get the
        boundary limit (see :meth:`degenerate`)."""
        raise NotImplementedError

    def degenerate(self, X):
        X = _rows(X, self.D)
        return np.zeros(X.shape[0], dtype=bool)

    def mle(self, x):
        X = self.check_data(x)
        theta = self.mle_batch(X)[0]
        if self.degenerate(X)[0]:
            raise DegenerateMLEError(
                f"{self.id}: likelihood supremum only reached at the boundary", limit=theta)
        return theta

    def plugin_log_density(self, X):
        """``log p(theta_hat(x), x)`` per row, extended to the boundary limit."""
        X = _rows(X, self.D)
        return self.log_density(self.mle_batch(X), X)

    def check_data(self, x):
        X = _rows(x, self.D)
        if X.shape[1] != self.D or not np.all(self.data_space.contains(X)):
            raise OutsideDataSpaceError(f"{self.id}: data point outside the data space")
        return X

    # sampling
    def sample(self, theta, seed, count):
        raise NotImplementedError

    def _check_sample_args(self, theta, count):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if count < 1:
            raise ValueError("count must be >= 1")
        if not self.param_space.contains(theta)[0]:
            raise ValueError(f"{self.id}: theta outside the parameter space")
        return theta

    # optional structure
    def sufficient_stat(self, X):
        raise NoSufficientStatError(f"{self.id} registers no sufficient statistic")

    def mle_from_stat(self, S):
        raise NoSufficientStatError(f"{self.id} registers no sufficient statistic")

    @property
    def has_sufficient_stat(self):
        return type(self).sufficient_stat is not ModelDescriptor.sufficient_stat

    def pushforward_pdf(self, theta_source, theta_eval):
        raise NoClosedFormError(f"{self.id} has no closed-form estimator density")

    def estimator_map(self):
        raise NoChartError(f"{self.id} has no estimator map with charts")


class DiscreteModel(ModelDescriptor):
    """Exact rational arithmetic is available through the ``*_key`` methods:
    parameter keys are tuples of Fractions."""

    discrete = True

    def enumerate(self):
        return self.data_space.enumerate()

    def pmf_exact(self, key, x):
        raise NotImplementedError

    def mle_key(self, x):
        raise NotImplementedError

    def stat_key(self, x):
        raise NoSufficientStatError(f"{self.id} registers no sufficient statistic")

    def stat_support(self):
        raise NoSufficientStatError(f"{self.id} registers no sufficient statistic")

    def stat_pmf_exact(self, key, s):
        raise NoSufficientStatError(f"{self.id} registers no sufficient statistic")

    def mle_from_stat_key(self, s):
        raise NoSufficientStatError(f"{self.id} registers no sufficient statistic")


class ContinuousModel(ModelDescriptor):
    """Adds the hooks the data-space integrators need."""

    def data_box(self, v, truncation=None):
        """``(lower, upper, tail_bound)``: a box that carries all of the
        luckiness-weighted plug-in mass except ``tail_bound``."""
        raise NotImplementedError

    def qmc_proposal(self, v):
        return None

    def break_levels(self, v):
        """Levels of the estimator at which the data-space integrand jumps or kinks."""
        if v.kind == "indicator-box" and self.K == 1:
            return [x for x in (v.lower[0], v.upper[0]) if math.isfinite(x)]
        return []

    def normalization_box(self, theta):
        """A data box holding all but a negligible part of ``p(theta, .)``,
        with a bound on the omitted mass."""
        raise NotImplementedError


def _positive_box(v, name):
    """Luckiness box on (0, inf) that keeps a complexity integral finite."""
    if v.kind != "indicator-box":
        raise InfiniteCompError(
            f"{name}: the complexity diverges without a luckiness box bounded away from 0 and inf",
            diagnostic="theta * g(theta) does not vanish at 0 or at inf")
    lo, hi = v.lower[0], v.upper[0]
    if not (lo > 0 and math.isfinite(hi)):
        raise InfiniteCompError(
            f"{name}: luckiness box [{lo}, {hi}] reaches 0 or inf, where the complexity diverges",
            diagnostic="theta * g(theta) does not vanish at 0 or at inf")
    return lo, hi


# -- discrete zoo --------------------------------------------------------------

@dataclass(frozen=True)
class Bernoulli(DiscreteModel):
    """N independent coin flips, theta = P(x_n = 1)."""

    N: int = 1
    id = "bernoulli"

    def __post_init__(self):
        _check_int(self.N, "N", 1)

    @property
    def data_space(self):
        return DataSpace(DISCRETE, self.N, alphabet=(0, 1))

    @property
    def param_space(self):
        return ParamSpace(1, (0.0,), (1.0,))

    def params(self):
        return {"N": self.N}

    def log_density(self, theta, X):
        X = _rows(X, self.N)
        t = _params(theta, X.shape[0], 1)[:, 0]
        k = X.sum(axis=1)
        return special.xlogy(k, t) + special.xlog1py(self.N - k, -t)

    def mle_batch(self, X):
        X = _rows(X, self.N)
        return (X.sum(axis=1) / self.N)[:, None]

    def sample(self, theta, seed, count):
        t = self._check_sample_args(theta, count)[0]
        rng = np.random.default_rng(seed)
        return (rng.random((count, self.N)) < t).astype(np.int64)

    def sufficient_stat(self, X):
        return _rows(X, self.N).sum(axis=1, keepdims=True)

    def mle_from_stat(self, S):
        return np.asarray(S, dtype=float).reshape(-1, 1) / self.N

    # exact
    def pmf_exact(self, key, x):
        t = key[0]
        k = sum(x)
        return t**k * (1 - t) ** (self.N - k)

    def mle_key(self, x):
        return (Fraction(sum(x), self.N),)

    def stat_key(self, x):
        return (sum(x),)

    def stat_support(self):
        return [(k,) for k in range(self.N + 1)]

    def stat_pmf_exact(self, key, s):
        t = key[0]
        k = s[0]
        return math.comb(self.N, k) * t**k * (1 - t) ** (self.N - k)

    def mle_from_stat_key(self, s):
        return (Fraction(s[0], self.N),)


@dataclass(frozen=True)
class Multinomial(DiscreteModel):
    """N independent draws from m categories; theta is the full probability
    vector (K = m, rows on the simplex)."""

    m: int = 3
    N: int = 1
    id = "multinomial"

    def __post_init__(self):
        _check_int(self.m, "m", 2)
        _check_int(self.N, "N", 1)

    @property
    def data_space(self):
        return DataSpace(DISCRETE, self.N, alphabet=tuple(range(self.m)))

    @property
    def param_space(self):
        return ParamSpace(self.m, (0.0,) * self.m, (1.0,) * self.m)

    def params(self):
        return {"m": self.m, "N": self.N}

    def _counts(self, X):
        X = _rows(X, self.N).astype(np.int64)
        return np.stack([(X == j).sum(axis=1) for j in range(self.m)], axis=1)

    def log_density(self, theta, X):
        C = self._counts(X)
        T = _params(theta, C.shape[0], self.m)
        return special.xlogy(C, T).sum(axis=1)

    def mle_batch(self, X):
        return self._counts(X) / self.N

    def sample(self, theta, seed, count):
        t = self._check_sample_args(theta, count)
        if abs(t.sum() - 1.0) > 1e-12:
            raise ValueError("multinomial theta must sum to 1")
        rng = np.random.default_rng(seed)
        return rng.choice(self.m, size=(count, self.N), p=t / t.sum())

    def sufficient_stat(self, X):
        return self._counts(X)

    def mle_from_stat(self, S):
        return np.asarray(S, dtype=float).reshape(-1, self.m) / self.N

    def pmf_exact(self, key, x):
        out = Fraction(1)
        for xi in x:
            out *= key[xi]
        return out

    def mle_key(self, x):
        return tuple(Fraction(c, self.N) for c in self.stat_key(x))

    def stat_key(self, x):
        counts = [0] * self.m
        for xi in x:
            counts[xi] += 1
        return tuple(counts)

    def stat_support(self):
        out = []
        for bars in itertools.combinations(range(self.N + self.m - 1), self.m - 1):
            edges = (-1,) + bars + (self.N + self.m - 1,)
            out.append(tuple(edges[j + 1] - edges[j] - 1 for j in range(self.m)))
        return out

    def stat_pmf_exact(self, key, s):
        coef = math.factorial(self.N)
        prob = Fraction(1)
        for c, t in zip(s, key):
            coef //= math.factorial(c)
            prob *= t**c
        return coef * prob

    def mle_from_stat_key(self, s):
        return tuple(Fraction(c, self.N) for c in s)


# -- continuous zoo ------------------------------------------------------------

def _mean_map(N, clamp=None):
    """Sample mean with its analytic Jacobian; ``clamp=(a, b)`` clips the
    mean and zeroes the Jacobian where the clip is active."""

    def fn(X):
        m = X.mean(axis=1)
        if clamp is not None:
            m = np.clip(m, clamp[0], clamp[1])
        return m[:, None]

    def jac(X):
        J = np.full((X.shape[0], 1, N), 1.0 / N)
        if clamp is not None:
            m = X.mean(axis=1)
            J[(m <= clamp[0]) | (m >= clamp[1])] = 0.0
        return J

    return fn, JacobianProvider(fn, "analytic", jac)


def _simplex_charts(N, level):
    """Charts of {x >= 0 : mean(x) = level} for the exponential family of maps."""
    t = float(level)
    S = N * t
    if N == 1:
        return [LevelSetChart([t], 0, points=[[t]])]
    if N == 2:
        return [LevelSetChart(
            [t], 1,
            param=lambda U: np.column_stack([U[:, 0], S - U[:, 0]]),
            lower=[0.0], upper=[S],
            tangent=lambda U: np.broadcast_to(np.array([[1.0], [-1.0]]), (U.shape[0], 2, 1)))]

    def stick(U):
        # stick breaking: x_j = S * u_j * prod_{i<j} (1 - u_i), last coordinate takes the rest
        rest = np.full(U.shape[0], S)
        cols = []
        for j in range(N - 1):
            cols.append(rest * U[:, j])
            rest = rest * (1.0 - U[:, j])
        cols.append(rest)
        return np.column_stack(cols)

    return [LevelSetChart([t], N - 1, param=stick, lower=np.zeros(N - 1), upper=np.ones(N - 1))]


@dataclass(frozen=True)
class Exponential(ContinuousModel):
    """N i.i.d. exponential draws with mean theta; MLE is the sample mean."""

    N: int = 1
    truncation: Optional[float] = None
    id = "exponential"

    def __post_init__(self):
        _check_int(self.N, "N", 1)
        _check_truncation(self.truncation)

    @property
    def data_space(self):
        return DataSpace(CONTINUOUS, self.N, (0.0,) * self.N, (math.inf,) * self.N,
                         truncation="luckiness-box")

    @property
    def param_space(self):
        return ParamSpace(1, (0.0,), (math.inf,), open_lower=True, open_upper=True)

    def params(self):
        return {"N": self.N, "truncation": self.truncation}

    def log_density(self, theta, X):
        X = _rows(X, self.N)
        t = _params(theta, X.shape[0], 1)[:, 0]
        s = X.sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = -self.N * np.log(t) - s / t
        out = np.where((t == 0) & (s == 0), np.inf, out)
        return np.where(np.any(X < 0, axis=1), -np.inf, out)

    def mle_batch(self, X):
        return _rows(X, self.N).mean(axis=1, keepdims=True)

    def degenerate(self, X):
        return _rows(X, self.N).sum(axis=1) == 0

    def plugin_log_density(self, X):
        m = _rows(X, self.N).mean(axis=1)
        with np.errstate(divide="ignore"):
            return -self.N * np.log(m) - self.N

    def sample(self, theta, seed, count):
        t = self._check_sample_args(theta, count)[0]
        return np.random.default_rng(seed).exponential(t, size=(count, self.N))

    def sufficient_stat(self, X):
        return _rows(X, self.N).sum(axis=1, keepdims=True)

    def mle_from_stat(self, S):
        return np.asarray(S, dtype=float).reshape(-1, 1) / self.N

    def pushforward_pdf(self, theta_source, theta_eval):
        """Gamma(shape N, scale theta/N) density of the sample mean."""
        return stats.gamma.pdf(theta_eval, a=self.N, scale=np.asarray(theta_source) / self.N)

    def estimator_map(self):
        fn, jac = _mean_map(self.N)
        return EstimatorMap(fn, jac, lambda t: _simplex_charts(self.N, t), "sample-mean")

    def data_box(self, v, truncation=None):
        _, hi = _positive_box(v, self.id)
        T = truncation if truncation is not None else self.truncation
        need = self.N * hi  # mean <= hi forces every coordinate below N * hi
        if T is None:
            T = need
        elif T < need:
            raise ConfigError(f"truncation {T} cuts into the luckiness region (needs >= {need})",
                              "truncation")
        return np.zeros(self.N), np.full(self.N, float(T)), 0.0

    def qmc_proposal(self, v):
        _, hi = _positive_box(v, self.id)
        return [stats.expon(scale=hi)] * self.N

    def normalization_box(self, theta):
        T = float(theta) * 50.0
        return np.zeros(self.N), np.full(self.N, T), self.N * math.exp(-50.0)


@dataclass(frozen=True)
class ExponentialClamped(ContinuousModel):
    """Exponential model restricted to theta in [a, b]; the MLE is the sample
    mean clipped to the interval."""

    N: int = 1
    a: float = 1.0
    b: float = math.e
    truncation: Optional[float] = None
    id = "exponential-clamped"

    def __post_init__(self):
        _check_int(self.N, "N", 1)
        if not (0 < self.a < self.b < math.inf):
            raise ConfigError("need 0 < a < b < inf", "bounds")
        _check_truncation(self.truncation)

    @property
    def data_space(self):
        return DataSpace(CONTINUOUS, self.N, (0.0,) * self.N, (math.inf,) * self.N,
                         truncation="tail-bound")

    @property
    def param_space(self):
        return ParamSpace(1, (self.a,), (self.b,))

    def params(self):
        return {"N": self.N, "a": self.a, "b": self.b, "truncation": self.truncation}

    def log_density(self, theta, X):
        return Exponential(self.N).log_density(theta, X)

    def mle_batch(self, X):
        return np.clip(_rows(X, self.N).mean(axis=1, keepdims=True), self.a, self.b)

    def sample(self, theta, seed, count):
        t = self._check_sample_args(theta, count)[0]
        return np.random.default_rng(seed).exponential(t, size=(count, self.N))

    def sufficient_stat(self, X):
        return _rows(X, self.N).sum(axis=1, keepdims=True)

    def mle_from_stat(self, S):
        return np.clip(np.asarray(S, dtype=float).reshape(-1, 1) / self.N, self.a, self.b)

    def pushforward_pdf(self, theta_source, theta_eval):
        raise NoClosedFormError(
            f"{self.id}: the clipped mean has atoms at a and b, so it has no density")

    def estimator_map(self):
        fn, jac = _mean_map(self.N, clamp=(self.a, self.b))
        return EstimatorMap(fn, jac, lambda t: _simplex_charts(self.N, t), "clamped-mean")

    def default_truncation(self):
        # the omitted mass is at most N * exp(-T / b) (union bound over coordinates)
        return self.b * (math.log(self.N) + 30.0)

    def data_box(self, v, truncation=None):
        T = truncation if truncation is not None else self.truncation
        if T is None:
            T = self.default_truncation()
        if T < self.N * self.b:
            raise ConfigError(f"truncation must be >= N*b = {self.N * self.b}", "truncation")
        return np.zeros(self.N), np.full(self.N, float(T)), self.tail_bound(T)

    def tail_bound(self, T):
        """Bound on the plug-in mass outside ``[0, T]^N`` for ``T >= N b``.

        There the mean exceeds b, the plug-in density is ``p(b, x)``, and
        ``P_b(some x_n > T) <= N exp(-T/b)``."""
        return min(1.0, self.N * math.exp(-T / self.b))

    def break_levels(self, v):
        return sorted({self.a, self.b, *super().break_levels(v)})

    def normalization_box(self, theta):
        return Exponential(self.N).normalization_box(theta)


@dataclass(frozen=True)
class GaussMean(ContinuousModel):
    """N i.i.d. unit-variance normal draws with mean theta."""

    N: int = 1
    truncation: Optional[float] = None
    id = "gauss-mean"

    def __post_init__(self):
        _check_int(self.N, "N", 1)
        _check_truncation(self.truncation)

    @property
    def data_space(self):
        return DataSpace(CONTINUOUS, self.N, (-math.inf,) * self.N, (math.inf,) * self.N,
                         truncation="luckiness-box-padded")

    @property
    def param_space(self):
        return ParamSpace(1, (-math.inf,), (math.inf,), open_lower=True, open_upper=True)

    def params(self):
        return {"N": self.N, "truncation": self.truncation}

    def log_density(self, theta, X):
        X = _rows(X, self.N)
        t = _params(theta, X.shape[0], 1)
        return -0.5 * self.N * math.log(2 * math.pi) - 0.5 * ((X - t) ** 2).sum(axis=1)

    def mle_batch(self, X):
        return _rows(X, self.N).mean(axis=1, keepdims=True)

    def sample(self, theta, seed, count):
        t = self._check_sample_args(theta, count)[0]
        return np.random.default_rng(seed).normal(t, 1.0, size=(count, self.N))

    def sufficient_stat(self, X):
        return _rows(X, self.N).sum(axis=1, keepdims=True)

    def mle_from_stat(self, S):
        return np.asarray(S, dtype=float).reshape(-1, 1) / self.N

    def pushforward_pdf(self, theta_source, theta_eval):
        return stats.norm.pdf(theta_eval, loc=theta_source, scale=1.0 / math.sqrt(self.N))

    def _basis(self):
        # orthonormal basis of the hyperplane orthogonal to (1, ..., 1)
        Q, _ = np.linalg.qr(np.column_stack([np.ones(self.N), np.eye(self.N)[:, : self.N - 1]]))
        return Q[:, 1:]

    def _charts(self, level):
        t = float(level)
        if self.N == 1:
            return [LevelSetChart([t], 0, points=[[t]])]
        B = self._basis()
        m = self.N - 1
        return [LevelSetChart(
            [t], m,
            param=lambda U: t + U @ B.T,
            lower=np.full(m, -CHART_HALF_WIDTH), upper=np.full(m, CHART_HALF_WIDTH),
            tangent=lambda U: np.broadcast_to(B, (U.shape[0], self.N, m)))]

    def estimator_map(self):
        fn, jac = _mean_map(self.N)
        return EstimatorMap(fn, jac, self._charts, "sample-mean")

    def _pad(self, truncation):
        T = truncation if truncation is not None else self.truncation
        return GAUSS_PAD if T is None else float(T)

    def data_box(self, v, truncation=None):
        if v.kind != "indicator-box" or not all(map(math.isfinite, v.lower + v.upper)):
            raise InfiniteCompError(f"{self.id}: the complexity diverges without a bounded luckiness box",
                                    diagnostic="g(theta) is constant, so its integral over R diverges")
        pad = self._pad(truncation)
        lo, hi = v.lower[0], v.upper[0]
        # mean in [lo, hi] with some |x_n - mean| > pad: the residual x_n - mean
        # has variance 1 - 1/N, and the mean's density under the plug-in is
        # sqrt(N / 2 pi), which bounds the omitted mass
        sd = math.sqrt(max(1.0 - 1.0 / self.N, 1e-300))
        tail = 0.0 if self.N == 1 else (hi - lo) * math.sqrt(self.N / (2 * math.pi)) * self.N * 2 * stats.norm.sf(pad / sd)
        return np.full(self.N, lo - pad), np.full(self.N, hi + pad), tail

    def qmc_proposal(self, v):
        lo, hi = v.lower[0], v.upper[0]
        return [stats.norm(loc=0.5 * (lo + hi), scale=max(1.25, 0.5 * (hi - lo)))] * self.N

    def normalization_box(self, theta):
        t = float(theta)
        return np.full(self.N, t - 10.0), np.full(self.N, t + 10.0), self.N * 2 * stats.norm.sf(10.0)


@dataclass(frozen=True)
class AnisoGauss2D(ContinuousModel):
    """Centered bivariate normal with variances theta/2 and theta/8.

    The density is ``(2 / (pi theta)) exp(-(x1^2 + 4 x2^2) / theta)`` and the
    MLE is ``x1^2 + 4 x2^2``.
    """

    truncation: Optional[float] = None
    id = "aniso-gauss-2d"

    def __post_init__(self):
        _check_truncation(self.truncation)

    @property
    def data_space(self):
        return DataSpace(CONTINUOUS, 2, (-math.inf, -math.inf), (math.inf, math.inf),
                         truncation="luckiness-box")

    @property
    def param_space(self):
        return ParamSpace(1, (0.0,), (math.inf,), open_lower=True, open_upper=True)

    def params(self):
        return {"truncation": self.truncation}

    @staticmethod
    def _s(X):
        return X[:, 0] ** 2 + 4.0 * X[:, 1] ** 2

    def log_density(self, theta, X):
        X = _rows(X, 2)
        t = _params(theta, X.shape[0], 1)[:, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.log(2.0 / (math.pi * t)) - self._s(X) / t

    def mle_batch(self, X):
        return self._s(_rows(X, 2))[:, None]

    def degenerate(self, X):
        return self._s(_rows(X, 2)) == 0

    def plugin_log_density(self, X):
        with np.errstate(divide="ignore"):
            return np.log(2.0 / (math.pi * self._s(_rows(X, 2)))) - 1.0

    def sample(self, theta, seed, count):
        t = self._check_sample_args(theta, count)[0]
        rng = np.random.default_rng(seed)
        return rng.normal(0.0, 1.0, size=(count, 2)) * np.array([math.sqrt(t / 2), math.sqrt(t / 8)])

    def sufficient_stat(self, X):
        return self._s(_rows(X, 2))[:, None]

    def mle_from_stat(self, S):
        return np.asarray(S, dtype=float).reshape(-1, 1)

    def pushforward_pdf(self, theta_source, theta_eval):
        """The estimator is exponential with mean theta."""
        return stats.expon.pdf(theta_eval, scale=theta_source)

    @staticmethod
    def ellipse_chart(level):
        r = math.sqrt(float(level))
        return [LevelSetChart(
            [float(level)], 1,
            param=lambda U: np.column_stack([r * np.cos(U[:, 0]), 0.5 * r * np.sin(U[:, 0])]),
            lower=[0.0], upper=[2 * math.pi],
            tangent=lambda U: np.stack([-r * np.sin(U[:, 0]), 0.5 * r * np.cos(U[:, 0])], axis=1)[:, :, None],
            periodic=True)]

    def estimator_map(self):
        fn = lambda X: self._s(X)[:, None]
        jac = JacobianProvider(fn, "analytic",
                               lambda X: np.stack([2 * X[:, 0], 8 * X[:, 1]], axis=1)[:, None, :])
        return EstimatorMap(fn, jac, self.ellipse_chart, "quadratic-form")

    def data_box(self, v, truncation=None):
        _, hi = _positive_box(v, self.id)
        r = math.sqrt(hi)
        return np.array([-r, -0.5 * r]), np.array([r, 0.5 * r]), 0.0

    def qmc_proposal(self, v):
        _, hi = _positive_box(v, self.id)
        return [stats.norm(scale=math.sqrt(hi / 2)), stats.norm(scale=math.sqrt(hi / 8))]

    def normalization_box(self, theta, k=8.0):
        """``+-k`` standard deviations per axis; the omitted mass is
        below ``2 * 2 * Phi(-k)``."""
        s = np.array([math.sqrt(theta / 2), math.sqrt(theta / 8)])
        return -k * s, k * s, 4 * stats.norm.sf(k)


# -- reparametrization ---------------------------------------------------------

@dataclass(frozen=True)
class Reparametrized(ContinuousModel):
    """A one-parameter model seen through a smooth monotone bijection
    ``eta = forward(theta)``. Data-space quantities are unchanged; parameter
    densities pick up the Jacobian of the change of variables."""

    base: ContinuousModel = field(default_factory=Exponential)
    forward: Callable = None
    inverse: Callable = None
    derivative: Callable = None  # d eta / d theta as a function of theta
    name: str = "rate"

    @property
    def id(self):
        return f"{self.base.id}[{self.name}]"

    @property
    def data_space(self):
        return self.base.data_space

    @property
    def param_space(self):
        ps = self.base.param_space
        with np.errstate(divide="ignore"):
            ends = sorted(float(self.forward(np.array(v))) for v in (ps.lower[0], ps.upper[0]))
        return ParamSpace(1, (ends[0],), (ends[1],), True, True)

    def params(self):
        return {"base": self.base.describe(), "parametrization": self.name}

    def log_density(self, theta, X):
        return self.base.log_density(self.inverse(np.asarray(theta, dtype=float)), X)

    def mle_batch(self, X):
        with np.errstate(divide="ignore"):
            return self.forward(self.base.mle_batch(X))

    def degenerate(self, X):
        return self.base.degenerate(X)

    def plugin_log_density(self, X):
        return self.base.plugin_log_density(X)

    def sample(self, eta, seed, count):
        return self.base.sample(self.inverse(np.asarray(eta, dtype=float)), seed, count)

    def sufficient_stat(self, X):
        return self.base.sufficient_stat(X)

    def mle_from_stat(self, S):
        return self.forward(self.base.mle_from_stat(S))

    def pushforward_pdf(self, eta_source, eta_eval):
        th_eval = self.inverse(np.asarray(eta_eval, dtype=float))
        dens = self.base.pushforward_pdf(self.inverse(np.asarray(eta_source, dtype=float)), th_eval)
        return dens / np.abs(self.derivative(th_eval))

    def estimator_map(self):
        inner = self.base.estimator_map()
        fn = lambda X: self.forward(inner(X))

        def jac(X):
            J = inner.jacobian
            from .jacobian import jacobian_batch
            return jacobian_batch(J, X) * self.derivative(inner(X))[:, :, None]

        charts = lambda eta: [
            LevelSetChart([float(eta)], c.dim, c.param, c.lower, c.upper, c.tangent, c.points, c.periodic)
            for c in inner.charts(float(self.inverse(np.array(eta, dtype=float))))]
        return EstimatorMap(fn, JacobianProvider(fn, "analytic", jac), charts, f"{inner.name}[{self.name}]")

    def base_luckiness(self, v):
        """The same weight written as a function of the base parameter."""
        if v.kind == "constant-one":
            return v
        if v.kind == "indicator-box":
            ends = sorted(float(self.inverse(np.array(e))) if e != 0 else math.inf
                          for e in (v.lower[0], v.upper[0]))
            return Luckiness("indicator-box", (ends[0],), (ends[1],), scale=v.scale)
        return Luckiness.custom(lambda T: v.fn(self.forward(T)), label=v.label).scaled(v.scale)

    def data_box(self, v, truncation=None):
        return self.base.data_box(self.base_luckiness(v), truncation)

    def qmc_proposal(self, v):
        return self.base.qmc_proposal(self.base_luckiness(v))

    def normalization_box(self, eta):
        return self.base.normalization_box(float(self.inverse(np.array(eta, dtype=float))))


def rate_parametrization(model):
    """Reparametrize a positive-scale model by the rate ``lambda = 1/theta``."""
    recip = lambda t: 1.0 / t
    return Reparametrized(model, recip, recip, lambda t: -1.0 / t**2, "rate")


# -- registry ------------------------------------------------------------------

def _check_int(value, name, minimum):
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < minimum:
        raise ConfigError(f"must be an integer >= {minimum}, got {value!r}", name)


def _check_truncation(value):
    if value is not None and not (isinstance(value, (int, float)) and value > 0 and math.isfinite(value)):
        raise ConfigError(f"must be a positive finite number, got {value!r}", "truncation")


_INT = lambda minimum, default: {"type": "integer", "minimum": minimum, "default": default}
_TRUNC = {"type": ["number", "null"], "exclusiveMinimum": 0, "default": None}

ZOO = {
    "bernoulli": (Bernoulli, {"N": _INT(1, 1)}),
    "multinomial": (Multinomial, {"m": _INT(2, 3), "N": _INT(1, 1)}),
    "exponential": (Exponential, {"N": _INT(1, 1), "truncation": _TRUNC}),
    "exponential-clamped": (ExponentialClamped, {
        "N": _INT(1, 1),
        "a": {"type": "number", "exclusiveMinimum": 0, "default": 1.0},
        "b": {"type": "number", "exclusiveMinimum": 0, "default": math.e},
        "bounds": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        "truncation": _TRUNC,
    }),
    "gauss-mean": (GaussMean, {"N": _INT(1, 1), "truncation": _TRUNC}),
    "aniso-gauss-2d": (AnisoGauss2D, {"truncation": _TRUNC}),
}


def model_ids():
    return list(ZOO)


def param_schema(model_id):
    if model_id not in ZOO:
        raise UnknownModelError(model_id)
    props = ZOO[model_id][1]
    return {
        "type": "object",
        "properties": {"id": {"const": model_id}, **props},
        "additionalProperties": False,
    }


def make_model(model_id, **params):
    """Build a zoo model from its id and JSON parameter block."""
    if model_id not in ZOO:
        raise UnknownModelError(model_id)
    cls, schema = ZOO[model_id]
    params = {k: v for k, v in params.items() if v is not None and k != "id"}
    unknown = sorted(set(params) - set(schema))
    if unknown:
        raise ConfigError(f"unknown parameter(s) {unknown} for {model_id}", "model")
    if "bounds" in params:
        a, b = params.pop("bounds")
        params["a"], params["b"] = float(a), float(b)
    for key in ("a", "b", "truncation"):
        if key in params and isinstance(params[key], int) and not isinstance(params[key], bool):
            params[key] = float(params[key])
    try:
        return cls(**params)
    except TypeError as exc:
        raise ConfigError(str(exc), "model") from None


def model_from_block(block):
    if not isinstance(block, dict) or "id" not in block:
        raise ConfigError("model block must be an object with an 'id'", "model")
    return make_model(block["id"], **{k: v for k, v in block.items() if k != "id"})


# -- operations ----------------------------------------------------------------

def default_base(model):
    return 2.0 if model.discrete else math.e


def log_max_likelihood(model, x, base=None):
    """``-log_b p(theta_hat(x), x)``; ``+inf`` when the maximum is 0 and
    ``-inf`` when the likelihood is unbounded (degenerate MLE)."""
    b = default_base(model) if base is None else float(base)
    if not b > 1:
        raise ValueError("log base must be > 1")
    X = model.check_data(x)
    if model.discrete:
        key = model.mle_key(tuple(int(v) for v in X[0]))
        p = model.pmf_exact(key, tuple(int(v) for v in X[0]))
        if p == 0:
            return math.inf
        # integer logs keep tiny rationals from underflowing
        return (math.log(p.denominator) - math.log(p.numerator)) / math.log(b)
    if model.degenerate(X)[0]:
        return -math.inf
    return float(-model.plugin_log_density(X)[0] / math.log(b))


def mle(model, x):
    return model.mle(x)


def sample(model, theta, seed, count):
    return model.sample(theta, seed, count)
