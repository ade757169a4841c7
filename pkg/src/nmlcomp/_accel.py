"""Numba switch.

Set ``NMLCOMP_DISABLE_NUMBA=1`` to force the pure-numpy code paths, e.g. for
debugging or on platforms without a working numba install.
"""

import os

_TRUTHY = {"1", "true", "yes", "on"}

DISABLED = os.environ.get("NMLCOMP_DISABLE_NUMBA", "").strip().lower() in _TRUTHY

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dependency in CI
    numba = None

HAVE_NUMBA = numba is not None
if HAVE_NUMBA:
    # skip TBB: old system builds only produce a warning before falling back
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
USE_NUMBA = HAVE_NUMBA and not DISABLED

NUMBA_OPTS = {"cache": True, "nogil": True}


def njit(*args, **kwargs):
    """``numba.njit`` with project defaults; identity decorator without numba."""
    opts = {**NUMBA_OPTS, **kwargs}
    if not HAVE_NUMBA:
        if len(args) == 1 and callable(args[0]):
            return args[0]
        return lambda f: f
    if len(args) == 1 and callable(args[0]):
        return numba.njit(**opts)(args[0])
    return numba.njit(*args, **opts)


# numba only recognises its own prange object inside jitted code
prange = numba.prange if HAVE_NUMBA else range


def set_num_threads(n):
    if USE_NUMBA and n:
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))
