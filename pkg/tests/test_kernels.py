import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from nmlcomp import _accel, kernels

finite = st.floats(-1e12, 1e12, allow_nan=False, allow_infinity=False)


class TestCompensatedSum:
    @given(arrays(np.float64, st.integers(0, 200), elements=finite))
    @settings(max_examples=200, deadline=None)
    def test_backends_agree_with_fsum(self, v):
        exact = math.fsum(v.tolist())
        tol = 1e-15 * max(1.0, float(np.abs(v).sum()))
        assert abs(kernels.compensated_sum_numba(v) - exact) <= tol
        assert kernels.compensated_sum_numpy(v) == exact

    def test_order_independent(self, rng):
        v = rng.standard_normal(100_000) * 10.0 ** rng.integers(-6, 6, 100_000)
        a = kernels.compensated_sum(v)
        b = kernels.compensated_sum(rng.permutation(v))
        assert abs(a - b) <= 1e-14 * np.abs(v).sum()

    def test_cancellation(self):
        v = np.array([1e16, 1.0, -1e16, 1.0])
        assert kernels.compensated_sum_numba(v) == 2.0
        assert kernels.compensated_sum_numpy(v) == 2.0


class TestRowVolumes:
    @given(st.integers(1, 4), st.integers(0, 4), st.integers(0, 2**31))
    @settings(max_examples=60, deadline=None)
    def test_parity_and_gram(self, K, extra, seed):
        D = K + extra
        J = np.random.default_rng(seed).uniform(-10, 10, (16, K, D))
        s = np.linalg.svd(J, compute_uv=False)
        # rounding scales with the matrix, not with the (possibly tiny) volume
        scale = s[:, 0] ** K
        for got in (kernels.row_volumes_numba(J), kernels.row_volumes_numpy(J)):
            assert np.all(np.abs(got - s.prod(axis=1)) <= 1e-12 * scale)

    def test_rank_deficient_is_zero(self):
        J = np.array([[[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]], [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]])
        np.testing.assert_array_equal(kernels.row_volumes_numba(J), [0.0, 0.0])
        np.testing.assert_array_equal(kernels.row_volumes_numpy(J), [0.0, 0.0])

    def test_dispatch_follows_flag(self, monkeypatch):
        J = np.ones((2, 1, 3))
        monkeypatch.setattr(_accel, "USE_NUMBA", False)
        np.testing.assert_allclose(kernels.row_volumes(J), math.sqrt(3))


def test_disable_flag_in_fresh_process():
    import subprocess
    import sys

    code = ("from nmlcomp import _accel, kernels; import numpy as np; "
            "assert not _accel.USE_NUMBA; print(kernels.compensated_sum(np.ones(10)))")
    out = subprocess.run([sys.executable, "-c", code], env={**__import__("os").environ,
                         "NMLCOMP_DISABLE_NUMBA": "1"}, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "10.0"
