"""Hot inner loops, each with a numba kernel and a numpy fallback.

The public names (:func:`compensated_sum`, :func:`row_volumes`) dispatch on
:data:`nmlcomp._accel.USE_NUMBA`; the ``*_numba`` and ``*_numpy`` variants are
exported so the benchmark and the parity tests can call both directly.
"""

import math

import numpy as np

from . import _accel
from ._accel import prange

RANK_RTOL = 1e-12


# -- compensated summation ---------------------------------------------------

@_accel.njit
def _neumaier(values):
    s = 0.0
    c = 0.0
    for i in range(values.shape[0]):
        v = values[i]
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
    return s + c


def compensated_sum_numba(values):
    return float(_neumaier(np.ascontiguousarray(values, dtype=np.float64).ravel()))


def compensated_sum_numpy(values):
    return math.fsum(np.asarray(values, dtype=np.float64).ravel().tolist())


def compensated_sum(values):
    """Sum with rounding error independent of the summation order (to ~1 ulp)."""
    if _accel.USE_NUMBA:
        return compensated_sum_numba(values)
    return compensated_sum_numpy(values)


# -- K-dimensional volume of the row space of K x D matrices -----------------
#
# sqrt(det(J J^T)) = product of Gram-Schmidt residual norms of the rows of J.
# Modified Gram-Schmidt with one reorthogonalization pass keeps each residual
# accurate to ~eps * |row|, so exact rank deficiency lands under RANK_RTOL.

@_accel.njit(parallel=True)
def _row_volumes_kernel(J, rtol):
    M, K, D = J.shape
    out = np.empty(M)
    for i in prange(M):
        Q = np.empty((K, D))
        vol = 1.0
        scale = 0.0
        for k in range(K):
            nk = 0.0
            for d in range(D):
                nk += J[i, k, d] * J[i, k, d]
            if nk > scale:
                scale = nk
        scale = math.sqrt(scale)
        for k in range(K):
            for d in range(D):
                Q[k, d] = J[i, k, d]
            for _ in range(2):
                for j in range(k):
                    dot = 0.0
                    for d in range(D):
                        dot += Q[k, d] * Q[j, d]
                    for d in range(D):
                        Q[k, d] -= dot * Q[j, d]
            nrm = 0.0
            for d in range(D):
                nrm += Q[k, d] * Q[k, d]
            nrm = math.sqrt(nrm)
            if nrm <= rtol * scale or nrm == 0.0:
                vol = 0.0
                break
            vol *= nrm
            for d in range(D):
                Q[k, d] /= nrm
        out[i] = vol
    return out


def row_volumes_numba(J):
    J = np.ascontiguousarray(J, dtype=np.float64)
    return _row_volumes_kernel(J, RANK_RTOL)


def row_volumes_numpy(J):
    J = np.asarray(J, dtype=np.float64)
    M, K, D = J.shape
    scale = np.sqrt(np.max(np.einsum("mkd,mkd->mk", J, J), axis=1))
    Q = np.empty_like(J)
    vol = np.ones(M)
    alive = np.ones(M, dtype=bool)
    for k in range(K):
        v = J[:, k, :].copy()
        for _ in range(2):
            for j in range(k):
                dot = np.einsum("md,md->m", v, Q[:, j, :])
                v -= dot[:, None] * Q[:, j, :]
        nrm = np.sqrt(np.einsum("md,md->m", v, v))
        dead = (nrm <= RANK_RTOL * scale) | (nrm == 0.0)
        alive &= ~dead
        vol *= np.where(dead, 1.0, nrm)
        Q[:, k, :] = v / np.where(dead, 1.0, nrm)[:, None]
    return np.where(alive, vol, 0.0)


def row_volumes(J):
    """``sqrt(det(J_i J_i^T))`` for a stack of K x D matrices, shape (M, K, D).

    Rows that are numerically dependent (a Gram-Schmidt residual below
    ``RANK_RTOL`` times the largest row norm) give exactly 0.
    """
    J = np.asarray(J, dtype=np.float64)
    if J.ndim != 3:
        raise ValueError(f"expected a (M, K, D) stack, got shape {J.shape}")
    if J.shape[0] == 0:
        return np.empty(0)
    if _accel.USE_NUMBA:
        return row_volumes_numba(J)
    return row_volumes_numpy(J)
