"""Jacobian matrices of estimator maps and their non-square determinant.

For a map f: R^D -> R^K with D >= K the volume factor is the product of the
singular values of the K x D Jacobian, equivalently sqrt(det(J J^T)).
"""

from dataclasses import dataclass
import sys
from typing import Callable, Optional

import numpy as np

from . import kernels
from .errors import NonDifferentiablePointError

RANK_RTOL = kernels.RANK_RTOL


@dataclass(frozen=True)
class JacobianProvider:
    """Jacobian of a vectorized map ``fn: (M, D) -> (M, K)``.

    ``mode="analytic"`` uses ``matrix_fn: (M, D) -> (M, K, D)``; the
    finite-difference mode uses central differences with ``step`` (default
    ``max(1e-6, 1e-6 * |x|_inf)`` per point).
    """

    fn: Callable
    mode: str = "central-finite-difference"
    matrix_fn: Optional[Callable] = None
    step: Optional[float] = None

    def __post_init__(self):
        if self.mode not in ("analytic", "central-finite-difference"):
            raise ValueError(f"unknown Jacobian mode {self.mode!r}")
        if self.mode == "analytic" and self.matrix_fn is None:
            raise ValueError("analytic mode needs matrix_fn")
        if self.step is not None and not self.step > 0:
            raise ValueError("finite-difference step must be > 0")

    def finite_difference(self, step=None):
        return JacobianProvider(self.fn, "central-finite-difference", None, step)


def _default_step(X):
    return np.maximum(1e-6, 1e-6 * np.max(np.abs(X), axis=1))


def jacobian_batch(provider, X):
    """Jacobians at every row of ``X`` (M, D), shape (M, K, D)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if provider.mode == "analytic":
        J = np.asarray(provider.matrix_fn(X), dtype=float)
        if J.ndim == 2:
            J = J[:, None, :]
    else:
        M, D = X.shape
        h = np.full(M, provider.step) if provider.step is not None else _default_step(X)
        cols = []
        for d in range(D):
            Xp = X.copy()
            Xm = X.copy()
            Xp[:, d] += h
            Xm[:, d] -= h
            fp = np.asarray(provider.fn(Xp), dtype=float).reshape(M, -1)
            fm = np.asarray(provider.fn(Xm), dtype=float).reshape(M, -1)
            cols.append((fp - fm) / (2.0 * h[:, None]))
        J = np.stack(cols, axis=-1)
    if not np.all(np.isfinite(J)):
        raise NonDifferentiablePointError("Jacobian has non-finite entries")
    return J


def jacobian_matrix(provider, x):
    """K x D Jacobian at a single point."""
    x = np.asarray(x, dtype=float).ravel()
    return jacobian_batch(provider, x[None, :])[0]


def nonsquare_jacobian_det(J):
    """Product of the K singular values of a K x D matrix (K <= D).

    Singular values below ``RANK_RTOL * sigma_max`` count as zero.
    """
    J = np.atleast_2d(np.asarray(J, dtype=float))
    K, D = J.shape
    if K > D:
        raise ValueError(f"need K <= D, got a {K}x{D} matrix")
    s = np.linalg.svd(J, compute_uv=False)
    if s[0] == 0.0 or s[-1] < RANK_RTOL * s[0]:
        return 0.0
    return float(np.prod(s))


def nonsquare_det_batch(Js):
    """Vectorized :func:`nonsquare_jacobian_det` for a (M, K, D) stack."""
    Js = np.asarray(Js, dtype=float)
    if Js.shape[1] > Js.shape[2]:
        raise ValueError("need K <= D")
    return kernels.row_volumes(Js)


def jacobian_det_batch(provider, X):
    return nonsquare_det_batch(jacobian_batch(provider, X))


def guarded_reciprocal(j):
    """``1/j`` for ``j > 0`` and 0 at ``j == 0``.

    Division is correctly rounded whenever the result fits in a double; below
    ``1/max_double`` the result is clamped to the largest finite double
    rather than overflowing to inf.
    """
    arr = np.asarray(j, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ValueError("guarded_reciprocal expects nonnegative input")
    out = np.zeros_like(arr)
    pos = arr > 0
    regular = arr > 1.0 / sys.float_info.max
    with np.errstate(divide="ignore"):
        out[regular] = 1.0 / arr[regular]
    out[pos & ~regular] = sys.float_info.max
    if np.ndim(j) == 0:
        return float(out)
    return out
