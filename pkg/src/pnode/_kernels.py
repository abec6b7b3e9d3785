"""Hot square-root filtering kernels.

Each kernel exists twice: a pure-numpy reference (`*_py`) and, unless the
environment variable ``PNODE_NO_NUMBA`` is set (or numba is missing), a
numba-compiled twin. The module-level names (``triangularize_core`` etc.)
dispatch to whichever variant is active; ``benchmarks/bench_kernels.py``
times both.

All kernels take contiguous float64 arrays. Covariances are carried as
right factors R with Sigma = R^T R; triangularizations sign-fix rows so
the diagonal is non-negative.
"""

import os

import numpy as np

NUMBA_ENABLED = os.environ.get("PNODE_NO_NUMBA", "").lower() not in ("1", "true", "yes")

# Relative pivot threshold below which an innovation factor counts as singular.
SINGULAR_RTOL = 1e-14


def triangularize_py(m):
    """Upper-triangular R with R^T R = m^T m, non-negative diagonal."""
    k, n = m.shape
    if k < n:
        mm = np.zeros((n, n))
        mm[:k, :] = m
    else:
        mm = m.copy()
    _, r = np.linalg.qr(mm)
    for i in range(n):
        if r[i, i] < 0.0:
            for j in range(i, n):
                r[i, j] = -r[i, j]
    return r


def predict_core_py(mean, rfac, a, q_sqrt):
    """Square-root prediction: mean -> a mean, Sigma -> a Sigma a^T + Q.

    The dense sum is never formed; the stacked matrix [R a^T; Q_sqrt] is
    triangularized instead.
    """
    d = mean.shape[0]
    stacked = np.empty((2 * d, d))
    stacked[:d, :] = rfac @ a.T
    stacked[d:, :] = q_sqrt
    _, r = np.linalg.qr(stacked)
    for i in range(d):
        if r[i, i] < 0.0:
            for j in range(i, d):
                r[i, j] = -r[i, j]
    return a @ mean, r


def condition_core_py(mean, rfac, h, residual):
    """Noiseless square-root measurement update.

    Block-triangularizes [R h^T | R]; the top-left block is a right factor
    of S = h Sigma h^T, the bottom-right block the posterior factor. Near-
    zero pivots of the S factor are skipped in the gain solve (triangular
    pseudo-inverse) and reported through the returned flag.

    Returns (posterior_mean, posterior_rfactor, innovation_factor, degenerate).
    """
    d = mean.shape[0]
    m = h.shape[0]
    full = np.zeros((m + d, m + d))
    full[:d, :m] = rfac @ h.T
    full[:d, m:] = rfac
    _, rr = np.linalg.qr(full)
    for i in range(m + d):
        if rr[i, i] < 0.0:
            for j in range(i, m + d):
                rr[i, j] = -rr[i, j]
    s_fac = rr[:m, :m].copy()
    cross = rr[:m, m:].copy()
    r_post = rr[m:, m:].copy()

    dmax = 0.0
    for i in range(m):
        if s_fac[i, i] > dmax:
            dmax = s_fac[i, i]
    pivot_tol = SINGULAR_RTOL * dmax
    degenerate = False

    # Solve s_fac^T w = residual (lower triangular), skipping dead pivots.
    w = np.zeros(m)
    for i in range(m):
        acc = residual[i]
        for j in range(i):
            acc -= s_fac[j, i] * w[j]
        if s_fac[i, i] <= pivot_tol:
            degenerate = True
            w[i] = 0.0
        else:
            w[i] = acc / s_fac[i, i]

    mean_post = mean + w @ cross
    return mean_post, r_post, s_fac, degenerate


triangularize_core = triangularize_py
predict_core = predict_core_py
condition_core = condition_core_py

if NUMBA_ENABLED:
    try:
        from numba import njit
    except ImportError:
        NUMBA_ENABLED = False
    else:
        triangularize_nb = njit(cache=True)(triangularize_py)
        predict_core_nb = njit(cache=True)(predict_core_py)
        condition_core_nb = njit(cache=True)(condition_core_py)
        triangularize_core = triangularize_nb
        predict_core = predict_core_nb
        condition_core = condition_core_nb
