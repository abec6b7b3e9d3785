"""Numba kernels agree with the pure-numpy reference path bit-for-bit-ish."""

import numpy as np
import pytest

from pnode import _kernels


requires_numba = pytest.mark.skipif(
    not _kernels.NUMBA_ENABLED, reason="numba disabled or unavailable"
)


def _cases(seed=0, n=25):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        dim = int(rng.integers(1, 10))
        m = int(rng.integers(1, dim + 1))
        mean = rng.standard_normal(dim)
        rfac = np.ascontiguousarray(np.triu(rng.standard_normal((dim, dim))))
        a = rng.standard_normal((dim, dim))
        q_sqrt = np.ascontiguousarray(np.triu(rng.standard_normal((dim, dim))))
        h = rng.standard_normal((m, dim))
        residual = rng.standard_normal(m)
        yield mean, rfac, a, q_sqrt, h, residual


@requires_numba
def test_triangularize_variants_agree():
    for _, rfac, a, _, _, _ in _cases(1):
        stacked = np.ascontiguousarray(np.vstack([rfac, a]))
        np.testing.assert_allclose(
            _kernels.triangularize_nb(stacked),
            _kernels.triangularize_py(stacked),
            atol=1e-13,
        )


@requires_numba
def test_predict_variants_agree():
    for mean, rfac, a, q_sqrt, _, _ in _cases(2):
        mean_nb, r_nb = _kernels.predict_core_nb(mean, rfac, a, q_sqrt)
        mean_py, r_py = _kernels.predict_core_py(mean, rfac, a, q_sqrt)
        np.testing.assert_allclose(mean_nb, mean_py, atol=1e-14)
        np.testing.assert_allclose(r_nb, r_py, atol=1e-13)


@requires_numba
def test_condition_variants_agree():
    for mean, rfac, _, _, h, residual in _cases(3):
        out_nb = _kernels.condition_core_nb(mean, rfac, h, residual)
        out_py = _kernels.condition_core_py(mean, rfac, h, residual)
        for a, b in zip(out_nb[:3], out_py[:3]):
            np.testing.assert_allclose(a, b, atol=1e-12)
        assert out_nb[3] == out_py[3]


def test_triangularize_pads_wide_input():
    m = np.array([[1.0, 2.0, 3.0]])
    r = _kernels.triangularize_py(m)
    assert r.shape == (3, 3)
    np.testing.assert_allclose(r.T @ r, m.T @ m, atol=1e-14)


def test_condition_skips_dead_pivots():
    # Zero covariance in the measured direction: the gain solve must not
    # divide by the vanishing pivot.
    mean = np.zeros(2)
    rfac = np.diag([0.0, 1.0])
    h = np.array([[1.0, 0.0]])
    mean_post, r_post, s_fac, degenerate = _kernels.condition_core_py(
        mean, rfac, h, np.array([1.0])
    )
    assert degenerate
    assert np.isfinite(mean_post).all()
    np.testing.assert_allclose(mean_post, mean)
