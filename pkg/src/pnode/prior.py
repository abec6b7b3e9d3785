"""The q-times integrated Wiener process prior.

Closed-form discrete transitions, the step-size preconditioner that keeps
their factorization well-conditioned, and exact Taylor-mode initialization
of the filter state at t0.

State ordering is derivative-major: x = [Y0; Y1; ...; Yq], each block of
length d, so the full transition is the small (q+1) matrix Kronecker-
expanded with the identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import taylor
from .errors import IllConditioned, UnsupportedField
from .statespace import GaussianSqrt

# Variance assigned to derivative blocks the initializer cannot pin down.
UNKNOWN_DERIVATIVE_VARIANCE = 1e6


@dataclass(frozen=True)
class IWPModel:
    """q-times integrated Wiener process over a d-dimensional solution."""

    d: int
    q: int
    diffusion: float = 1.0

    def __post_init__(self):
        if self.d < 1 or self.q < 1 or self.diffusion < 0:
            raise ValueError("need d >= 1, q >= 1, diffusion >= 0")

    @property
    def state_dim(self) -> int:
        return self.d * (self.q + 1)

    def transition(self, h: float):
        """Full transition matrix and process-noise right factor for step h."""
        a_small, _, q_sqrt_small = iwp_transition(self.q, h)
        eye = np.eye(self.d)
        a = np.kron(a_small, eye)
        q_sqrt = math.sqrt(self.diffusion) * np.kron(q_sqrt_small, eye)
        return a, q_sqrt


@dataclass(frozen=True)
class Projection:
    """Selector E_i of the i-th derivative block of the state."""

    index: int
    d: int
    q: int

    def __post_init__(self):
        if not 0 <= self.index <= self.q:
            raise ValueError("projection index out of range")

    @property
    def matrix(self) -> np.ndarray:
        e = np.zeros((self.d, self.d * (self.q + 1)))
        e[:, self.index * self.d : (self.index + 1) * self.d] = np.eye(self.d)
        return e

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return x[self.index * self.d : (self.index + 1) * self.d]


@lru_cache(maxsize=None)
def _abar(q: int) -> np.ndarray:
    a = np.zeros((q + 1, q + 1))
    for i in range(q + 1):
        for j in range(i, q + 1):
            a[i, j] = math.comb(q - i, j - i)
    return a


@lru_cache(maxsize=None)
def _qbar(q: int) -> np.ndarray:
    i, j = np.meshgrid(np.arange(q + 1), np.arange(q + 1), indexing="ij")
    return 1.0 / (2 * q + 1 - i - j)


@lru_cache(maxsize=None)
def _qbar_sqrt(q: int) -> np.ndarray:
    qbar = _qbar(q)
    try:
        # Right-factor convention: Q = R^T R with R upper triangular.
        return np.linalg.cholesky(qbar).T
    except np.linalg.LinAlgError as exc:
        w, v = np.linalg.eigh(qbar)
        if w.max() <= 0:
            raise IllConditioned("step-free process noise not PSD") from exc
        w = np.clip(w, 1e-15 * w.max(), None)
        return np.sqrt(w)[:, None] * v.T


def preconditioner(q: int, h: float):
    """Step-size preconditioner and the h-free transition pair.

    Returns (t, t_inv, abar, qbar, qbar_sqrt) with t diagonal such that
    A(h) = t abar t^-1 and Q(h) = t qbar t exactly.
    """
    if h <= 0:
        raise ValueError("need h > 0")
    powers = np.array([q - i + 0.5 for i in range(q + 1)])
    facts = np.array([math.factorial(q - i) for i in range(q + 1)], dtype=float)
    tdiag = h ** powers / facts
    return tdiag, 1.0 / tdiag, _abar(q), _qbar(q), _qbar_sqrt(q)


def iwp_transition(q: int, h: float):
    """Closed-form (q+1)-sized transition and process-noise matrices.

    The noise right factor comes from the h-free factorization scaled back
    through the preconditioner; the raw, ill-conditioned Q(h) is never
    factorized directly.
    """
    if h < 0:
        raise ValueError("need h >= 0")
    n = q + 1
    a = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            a[i, j] = h ** (j - i) / math.factorial(j - i)
    if h == 0:
        return a, np.zeros((n, n)), np.zeros((n, n))
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    facts = np.array([math.factorial(k) for k in range(n)], dtype=float)
    qmat = h ** (2 * q + 1 - i - j) / (
        (2 * q + 1 - i - j) * facts[q - i] * facts[q - j]
    )
    tdiag, _, _, _, qbar_sqrt = preconditioner(q, h)
    q_sqrt = qbar_sqrt * tdiag[None, :]
    return a, qmat, q_sqrt


def taylor_coefficients(problem, q: int) -> list:
    """Exact solution derivatives [y(t0), y'(t0), ..., y^(q)(t0)].

    Works for explicit, autonomous first- and second-order fields built
    from the jet primitives; second-order problems are lifted to first
    order internally for the recursion.
    """
    if getattr(problem, "mass", None) is not None:
        raise UnsupportedField("mass-matrix problems have no explicit jet recursion")
    y0 = np.asarray(problem.y0, dtype=float)
    d = y0.shape[0]
    if problem.order == 1:
        coeffs = taylor.propagate(problem.f, y0, q + 1)
        y_coeffs = coeffs
    elif problem.order == 2:
        dy0 = np.asarray(problem.dy0, dtype=float)
        state0 = np.concatenate([y0, dy0])

        def lifted(u):
            dy = u[d:]
            acc = problem.f(dy, u[:d])
            out = np.empty(2 * d, dtype=object)
            out[:d] = dy
            out[d:] = acc
            return out

        coeffs = taylor.propagate(lifted, state0, q + 1)
        y_coeffs = coeffs[:, :d]
    else:
        raise UnsupportedField(f"unsupported problem order {problem.order}")
    return [math.factorial(k) * y_coeffs[k] for k in range(q + 1)]


def initial_state(problem, q: int) -> GaussianSqrt:
    """Filter state at t0: exact Taylor blocks get zero variance.

    DAEs (and fields outside the jet arithmetic) fall back to a partial
    initialization: Y0 is pinned exactly, Y1 solves M v = f(y0) stacked
    with the differentiated algebraic constraints J_alg v = 0, and Y2
    solves the once-differentiated system M w = J_f(y0) Y1 (min-norm).
    Every non-exact block gets a large independent variance so the first
    updates can resolve it.
    """
    y0 = np.asarray(problem.y0, dtype=float)
    d = y0.shape[0]
    dim = d * (q + 1)
    mean = np.zeros(dim)
    var_diag = np.zeros(dim)

    if getattr(problem, "mass", None) is not None:
        mass = np.asarray(problem.mass, dtype=float)
        mdiag = np.diag(mass)
        semi_explicit = (
            problem.order == 1
            and problem.jac is not None
            and np.array_equal(mass, np.diag(mdiag))
            and set(np.unique(mdiag)) <= {0.0, 1.0}
        )
        if semi_explicit:
            try:
                jac0 = np.asarray(problem.jac(y0), dtype=float)
                coeffs = taylor.propagate_dae(
                    problem.f, y0, mdiag.astype(bool), jac0, q + 1
                )
            except (UnsupportedField, np.linalg.LinAlgError):
                pass
            else:
                for k in range(q + 1):
                    mean[k * d : (k + 1) * d] = math.factorial(k) * coeffs[k]
                return GaussianSqrt(mean, np.zeros((dim, dim)))
        mean[:d] = y0
        f0 = np.asarray(problem.f(y0), dtype=float)
        jac0 = None if problem.jac is None else np.asarray(problem.jac(y0), dtype=float)
        lhs, rhs = mass, f0
        if jac0 is not None:
            alg = ~mass.any(axis=1)
            if alg.any():
                lhs = np.vstack([mass, jac0[alg]])
                rhs = np.concatenate([f0, np.zeros(int(alg.sum()))])
        v, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
        mean[d : 2 * d] = v
        if q >= 2 and jac0 is not None:
            w, *_ = np.linalg.lstsq(mass, jac0 @ v, rcond=None)
            mean[2 * d : 3 * d] = w
        var_diag[d:] = UNKNOWN_DERIVATIVE_VARIANCE
        return GaussianSqrt(mean, np.diag(np.sqrt(var_diag)))

    try:
        derivs = taylor_coefficients(problem, q)
    except UnsupportedField:
        mean[:d] = y0
        if problem.order == 1:
            mean[d : 2 * d] = np.asarray(problem.f(y0), dtype=float)
            exact_blocks = 2
        else:
            dy0 = np.asarray(problem.dy0, dtype=float)
            mean[d : 2 * d] = dy0
            if q >= 2:
                mean[2 * d : 3 * d] = np.asarray(problem.f(dy0, y0), dtype=float)
                exact_blocks = 3
            else:
                exact_blocks = 2
        var_diag[exact_blocks * d :] = UNKNOWN_DERIVATIVE_VARIANCE
        return GaussianSqrt(mean, np.diag(np.sqrt(var_diag)))

    for k, vec in enumerate(derivs):
        mean[k * d : (k + 1) * d] = vec
    return GaussianSqrt(mean, np.zeros((dim, dim)))
