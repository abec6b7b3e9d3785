"""Truncated power-series ("jet") arithmetic.

A :class:`Jet` holds the coefficients c_0..c_K of a truncated Taylor
series in one variable. Vector fields written with +, -, *, /, real
powers and square roots evaluate transparently on object arrays of jets,
which is what drives the exact Taylor initialization of the prior.
"""

from __future__ import annotations

import numpy as np

from .errors import UnsupportedField


class Jet:
    """Truncated Taylor series with float coefficients."""

    __slots__ = ("c",)

    def __init__(self, coeffs):
        self.c = np.asarray(coeffs, dtype=float)

    @property
    def order(self) -> int:
        return self.c.shape[0]

    @classmethod
    def constant(cls, value: float, order: int) -> "Jet":
        c = np.zeros(order)
        c[0] = float(value)
        return cls(c)

    def coefficient(self, k: int) -> float:
        return float(self.c[k]) if k < self.order else 0.0

    def _coerce(self, other) -> "Jet":
        if isinstance(other, Jet):
            if other.order != self.order:
                raise ValueError("jet truncation orders differ")
            return other
        return Jet.constant(other, self.order)

    def __add__(self, other):
        other = self._coerce(other)
        return Jet(self.c + other.c)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.c)

    def __sub__(self, other):
        other = self._coerce(other)
        return Jet(self.c - other.c)

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.c * float(other))
        other = self._coerce(other)
        return Jet(np.convolve(self.c, other.c)[: self.order])

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.c / float(other))
        other = self._coerce(other)
        if other.c[0] == 0.0:
            raise UnsupportedField("jet division by a series with zero constant term")
        k = self.order
        out = np.zeros(k)
        for i in range(k):
            acc = self.c[i]
            for j in range(1, i + 1):
                acc -= other.c[j] * out[i - j]
            out[i] = acc / other.c[0]
        return Jet(out)

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def __pow__(self, exponent):
        p = float(exponent)
        if p.is_integer() and p >= 0:
            n = int(p)
            result = Jet.constant(1.0, self.order)
            base = self
            while n:
                if n & 1:
                    result = result * base
                base = base * base
                n >>= 1
            return result
        if self.c[0] <= 0.0:
            raise UnsupportedField("non-integer jet power needs a positive constant term")
        k = self.order
        out = np.zeros(k)
        out[0] = self.c[0] ** p
        for i in range(1, k):
            acc = 0.0
            for j in range(1, i + 1):
                acc += ((p + 1.0) * j - i) * self.c[j] * out[i - j]
            out[i] = acc / (i * self.c[0])
        return Jet(out)

    def sqrt(self):
        return self ** 0.5

    def __repr__(self):
        return f"Jet({self.c!r})"


def jet_coefficient(value, k: int) -> float:
    """k-th series coefficient of a jet or of a plain constant."""
    if isinstance(value, Jet):
        return value.coefficient(k)
    return float(value) if k == 0 else 0.0


def propagate_dae(field, state0: np.ndarray, diff_mask, jac0: np.ndarray, n_coeffs: int):
    """Taylor coefficients for a semi-explicit index-1 DAE at t = 0.

    Components with ``diff_mask`` True follow x_i' = field(x)_i; the
    remaining rows are algebraic constraints 0 = field(x)_i. Differential
    coefficients advance by the ODE recursion; algebraic coefficients are
    chosen order by order so every series coefficient of the constraint
    rows vanishes, which needs the algebraic/algebraic Jacobian block at
    the initial state (``jac0``) to be invertible (index 1).
    """
    state0 = np.asarray(state0, dtype=float)
    d = state0.shape[0]
    diff_mask = np.asarray(diff_mask, dtype=bool)
    alg_idx = np.where(~diff_mask)[0]
    diff_idx = np.where(diff_mask)[0]
    jaa = np.asarray(jac0, dtype=float)[np.ix_(alg_idx, alg_idx)]
    if alg_idx.size and abs(np.linalg.det(jaa)) < 1e-12:
        raise UnsupportedField("singular algebraic Jacobian block (DAE index > 1)")

    coeffs = np.zeros((n_coeffs, d))
    coeffs[0] = state0

    def eval_field(order):
        jets = np.empty(d, dtype=object)
        for i in range(d):
            jets[i] = Jet(coeffs[:order, i])
        try:
            return field(jets)
        except (TypeError, AttributeError) as exc:
            raise UnsupportedField(str(exc)) from exc

    f0 = eval_field(1)
    res0 = np.array([jet_coefficient(f0[i], 0) for i in alg_idx])
    if res0.size and np.max(np.abs(res0)) > 1e-10 * (1.0 + float(np.max(np.abs(state0)))):
        raise UnsupportedField("inconsistent algebraic initial values")

    for k in range(n_coeffs - 1):
        fj = eval_field(k + 1)
        for i in diff_idx:
            coeffs[k + 1, i] = jet_coefficient(fj[i], k) / (k + 1)
        if alg_idx.size:
            # Constraint coefficient k+1 with the algebraic entries still
            # zero; it depends on them only through the Jacobian block.
            fj = eval_field(k + 2)
            residual = np.array([jet_coefficient(fj[i], k + 1) for i in alg_idx])
            coeffs[k + 1, alg_idx] = -np.linalg.solve(jaa, residual)
    return coeffs


def propagate(field, state0: np.ndarray, n_coeffs: int) -> np.ndarray:
    """Taylor coefficients of the solution of x' = field(x) at t = 0.

    Returns an array of shape (n_coeffs, d) holding c_0..c_{n_coeffs-1}
    with x(t) = sum_k c_k t^k. The field must be autonomous and built
    from the jet primitives; anything else raises UnsupportedField.
    """
    state0 = np.asarray(state0, dtype=float)
    d = state0.shape[0]
    coeffs = np.zeros((n_coeffs, d))
    coeffs[0] = state0
    for k in range(n_coeffs - 1):
        jets = np.empty(d, dtype=object)
        for i in range(d):
            jets[i] = Jet(coeffs[: k + 1, i])
        try:
            fj = field(jets)
        except (TypeError, AttributeError) as exc:
            raise UnsupportedField(str(exc)) from exc
        for i in range(d):
            coeffs[k + 1, i] = jet_coefficient(fj[i], k) / (k + 1)
    return coeffs
