"""Square-root Gaussian linear algebra.

Covariances are carried as right factors: Sigma = R^T R with R upper
triangular and non-negative diagonal. Prediction and conditioning are
single stacked triangularizations; dense covariances are only assembled
on demand (``GaussianSqrt.cov``). All operations are pure functions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg

from . import _kernels


@dataclass(frozen=True)
class GaussianSqrt:
    """Gaussian state N(mean, R^T R) in right-factor form."""

    mean: np.ndarray
    rfactor: np.ndarray

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @property
    def cov(self) -> np.ndarray:
        return self.rfactor.T @ self.rfactor

    def marginal_std(self) -> np.ndarray:
        """Componentwise standard deviations (column norms of R)."""
        return np.linalg.norm(self.rfactor, axis=0)


class ConditionResult(NamedTuple):
    state: GaussianSqrt
    innovation_factor: np.ndarray
    degenerate: bool


def triangularize(m: np.ndarray) -> np.ndarray:
    """Upper-triangular R with R^T R = m^T m and non-negative diagonal."""
    m = np.ascontiguousarray(m, dtype=np.float64)
    if m.shape[0] == 0:
        return np.zeros((m.shape[1], m.shape[1]))
    return _kernels.triangularize_core(m)


def predict(state: GaussianSqrt, a: np.ndarray, q_sqrt: np.ndarray) -> GaussianSqrt:
    """Extrapolate through x -> a x + noise with noise covariance q_sqrt^T q_sqrt."""
    mean, rfac = _kernels.predict_core(
        np.ascontiguousarray(state.mean, dtype=np.float64),
        np.ascontiguousarray(state.rfactor, dtype=np.float64),
        np.ascontiguousarray(a, dtype=np.float64),
        np.ascontiguousarray(q_sqrt, dtype=np.float64),
    )
    return GaussianSqrt(mean, rfac)


def condition(state: GaussianSqrt, h: np.ndarray, residual: np.ndarray) -> ConditionResult:
    """Condition on the noiseless observation h x = h mu + residual.

    ``residual`` is the observed value minus the predicted observation
    (zero observations everywhere in this package, so callers pass -z).
    A numerically singular innovation factor is handled with a triangular
    pseudo-inverse and reported via ``degenerate``; the caller decides
    whether that is fatal.
    """
    mean, rfac, s_fac, degenerate = _kernels.condition_core(
        np.ascontiguousarray(state.mean, dtype=np.float64),
        np.ascontiguousarray(state.rfactor, dtype=np.float64),
        np.ascontiguousarray(np.atleast_2d(h), dtype=np.float64),
        np.ascontiguousarray(residual, dtype=np.float64),
    )
    return ConditionResult(GaussianSqrt(mean, rfac), s_fac, bool(degenerate))


def _psd_right_factor(mat: np.ndarray) -> np.ndarray:
    """Right factor of a (nearly) PSD matrix via clipped eigendecomposition."""
    w, v = np.linalg.eigh((mat + mat.T) / 2.0)
    w = np.clip(w, 0.0, None)
    return np.sqrt(w)[:, None] * v.T


def _smooth_core(
    filtered_n: GaussianSqrt,
    predicted_next: GaussianSqrt,
    smoothed_next: GaussianSqrt,
    a: np.ndarray,
):
    """One backward smoothing step; also returns the gain and the factor of
    the backward conditional covariance (needed for joint sampling)."""
    r_f = filtered_n.rfactor
    r_p = predicted_next.rfactor
    d = filtered_n.dim

    diag = np.abs(np.diag(r_p))
    if diag.min() <= 1e-14 * max(diag.max(), 1.0):
        # Rank-deficient prediction: nudge the factor and proceed.
        r_p = r_p + 1e-14 * max(np.abs(np.trace(r_p)), 1.0) * np.eye(d)

    x = r_f @ a.T
    # G = Sigma_n a^T (Sigma_next^-)^{-1}, via two triangular solves.
    g0 = r_f.T @ x
    tmp = scipy.linalg.solve_triangular(r_p.T, g0.T, lower=True)
    gain = scipy.linalg.solve_triangular(r_p, tmp, lower=False).T

    mean = filtered_n.mean + gain @ (smoothed_next.mean - predicted_next.mean)

    # Joseph-style factor assembly: Sigma_s = J Sigma_n J^T + G Q G^T + G Lambda G^T
    # with J = I - G a and Q the process noise recovered from the prediction.
    q_dense = r_p.T @ r_p - x.T @ x
    r_q = _psd_right_factor(q_dense)
    j = np.eye(d) - gain @ a
    cond_factor = triangularize(np.vstack([r_f @ j.T, r_q @ gain.T]))
    rfac = triangularize(np.vstack([cond_factor, smoothed_next.rfactor @ gain.T]))
    return GaussianSqrt(mean, rfac), gain, cond_factor


def smooth_pair(
    filtered_n: GaussianSqrt,
    predicted_next: GaussianSqrt,
    smoothed_next: GaussianSqrt,
    a: np.ndarray,
) -> GaussianSqrt:
    """Rauch-Tung-Striebel backward step in square-root form.

    ``predicted_next`` must be the prediction obtained from ``filtered_n``
    through the transition ``a`` (with whatever process noise was used).
    """
    state, _, _ = _smooth_core(filtered_n, predicted_next, smoothed_next, a)
    return state
