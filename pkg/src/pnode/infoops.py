"""Information operators: measurement models that vanish on the true solution.

Each constructor returns an :class:`InformationOperator` exposing the
residual z(t, x) and its linearization H(t, x) on the derivative-major
filter state. Operators are immutable; evaluate/linearize are pure.

The ``role`` tag separates the operator describing the differential
equation itself ("ode", which alone feeds calibration and step control)
from auxiliary information ("auxiliary": invariants, chain-rule second
derivatives).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    MultipleOdeOperators,
    NoOdeOperator,
    NonFiniteField,
    OrderTooLow,
)

EK0 = "EK0"
EK1 = "EK1"


@dataclass(frozen=True)
class InformationOperator:
    out_dim: int
    evaluate: Callable[[float, np.ndarray], np.ndarray]
    linearize: Callable[[float, np.ndarray], np.ndarray]
    role: str = "ode"
    # Work accounting: vector-field / Jacobian evaluations per call.
    eval_cost: int = 1
    lin_cost: int = 1


@dataclass(frozen=True)
class Joint:
    """Stack all residuals into a single update."""

    operators: Sequence[InformationOperator]


@dataclass(frozen=True)
class Partitioned:
    """Apply updates in order, re-linearizing at the partially updated mean."""

    operators: Sequence[InformationOperator]


OperatorScheme = Joint | Partitioned


@dataclass(frozen=True)
class UpdatePlan:
    scheme: OperatorScheme
    ode_operator: InformationOperator
    auxiliaries: tuple = field(default_factory=tuple)

    @property
    def joint(self) -> bool:
        return isinstance(self.scheme, Joint)


def _block(x: np.ndarray, i: int, d: int) -> np.ndarray:
    return x[i * d : (i + 1) * d]


def _projection(i: int, d: int, width: int) -> np.ndarray:
    e = np.zeros((d, width))
    e[:, i * d : (i + 1) * d] = np.eye(d)
    return e


def _check_finite(vec: np.ndarray, what: str) -> np.ndarray:
    vec = np.asarray(vec, dtype=float)
    if not np.all(np.isfinite(vec)):
        raise NonFiniteField(f"{what} returned a non-finite value")
    return vec


def fd_jacobian(func, y: np.ndarray, scale: float = 1e-6) -> np.ndarray:
    """Central finite differences with per-coordinate step scale*(1+|y_i|)."""
    y = np.asarray(y, dtype=float)
    f0 = np.atleast_1d(np.asarray(func(y), dtype=float))
    jac = np.empty((f0.shape[0], y.shape[0]))
    for i in range(y.shape[0]):
        step = scale * (1.0 + abs(y[i]))
        yp = y.copy()
        ym = y.copy()
        yp[i] += step
        ym[i] -= step
        jac[:, i] = (
            np.atleast_1d(np.asarray(func(yp), dtype=float))
            - np.atleast_1d(np.asarray(func(ym), dtype=float))
        ) / (2 * step)
    return jac


def ode1_operator(f, jacobian_f, approx: str, d: int, q: int) -> InformationOperator:
    """z = Y1 - f(Y0) for a first-order field; H per EK0/EK1."""
    width = d * (q + 1)
    e1 = _projection(1, d, width)
    if jacobian_f is None:
        jacobian_f = lambda y: fd_jacobian(f, y)

    def evaluate(t, x):
        y = _block(x, 0, d)
        return _check_finite(_block(x, 1, d) - f(y), "vector field")

    if approx == EK0:
        linearize = lambda t, x: e1
        lin_cost = 0
    elif approx == EK1:
        def linearize(t, x):
            y = _block(x, 0, d)
            jac = _check_finite(np.atleast_2d(jacobian_f(y)), "Jacobian")
            h = e1.copy()
            h[:, :d] -= jac
            return h

        lin_cost = 1
    else:
        raise ValueError(f"unknown approximation {approx!r}")
    return InformationOperator(d, evaluate, linearize, role="ode", lin_cost=lin_cost)


def ode2_operator(f, df_dy, df_dydot, approx: str, d: int, q: int) -> InformationOperator:
    """z = Y2 - f(Y1, Y0) for a second-order field; H per EK0/EK1."""
    if q < 2:
        raise OrderTooLow("second-order operator needs q >= 2")
    width = d * (q + 1)
    e2 = _projection(2, d, width)
    if df_dy is None:
        df_dy = lambda dy, y: fd_jacobian(lambda yy: f(dy, yy), y)
    if df_dydot is None:
        df_dydot = lambda dy, y: fd_jacobian(lambda vv: f(vv, y), dy)

    def evaluate(t, x):
        y, dy = _block(x, 0, d), _block(x, 1, d)
        return _check_finite(_block(x, 2, d) - f(dy, y), "vector field")

    if approx == EK0:
        linearize = lambda t, x: e2
        lin_cost = 0
    elif approx == EK1:
        def linearize(t, x):
            y, dy = _block(x, 0, d), _block(x, 1, d)
            h = e2.copy()
            h[:, :d] -= _check_finite(np.atleast_2d(df_dy(dy, y)), "Jacobian")
            h[:, d : 2 * d] -= _check_finite(np.atleast_2d(df_dydot(dy, y)), "Jacobian")
            return h

        lin_cost = 1
    else:
        raise ValueError(f"unknown approximation {approx!r}")
    return InformationOperator(d, evaluate, linearize, role="ode", lin_cost=lin_cost)


def dae_operator(mass, f, jacobian_f, d: int, q: int) -> InformationOperator:
    """z = M Y1 - f(Y0); exact linearization H = M E1 - J_f E0."""
    mass = np.asarray(mass, dtype=float)
    width = d * (q + 1)
    e0 = _projection(0, d, width)
    e1 = _projection(1, d, width)
    if jacobian_f is None:
        jacobian_f = lambda y: fd_jacobian(f, y)

    def evaluate(t, x):
        y = _block(x, 0, d)
        return _check_finite(mass @ _block(x, 1, d) - f(y), "vector field")

    def linearize(t, x):
        y = _block(x, 0, d)
        jac = _check_finite(np.atleast_2d(jacobian_f(y)), "Jacobian")
        return mass @ e1 - jac @ e0

    return InformationOperator(d, evaluate, linearize, role="ode")


def invariant_operator(g, dg_dy, dg_dydot, d: int, q: int, out_dim: int = 1) -> InformationOperator:
    """z = g(Y1, Y0): deviation from the conserved quantities, zero at t0."""
    width = d * (q + 1)

    def evaluate(t, x):
        y, dy = _block(x, 0, d), _block(x, 1, d)
        return _check_finite(np.atleast_1d(g(dy, y)), "invariant")

    def linearize(t, x):
        y, dy = _block(x, 0, d), _block(x, 1, d)
        h = np.zeros((out_dim, width))
        h[:, :d] = np.atleast_2d(dg_dy(dy, y))
        h[:, d : 2 * d] = np.atleast_2d(dg_dydot(dy, y))
        return _check_finite(h, "invariant Jacobian")

    return InformationOperator(out_dim, evaluate, linearize, role="auxiliary")


def chainrule_operator(f, jacobian_f, jacobian_of_jff, d: int, q: int) -> InformationOperator:
    """z = Y2 - J_f(Y0) f(Y0): second derivatives implied by the chain rule."""
    if q < 2:
        raise OrderTooLow("chain-rule operator needs q >= 2")
    width = d * (q + 1)
    e2 = _projection(2, d, width)

    def jff(y):
        return np.atleast_2d(jacobian_f(y)) @ np.atleast_1d(f(y))

    if jacobian_of_jff is None:
        jacobian_of_jff = lambda y: fd_jacobian(jff, y)

    def evaluate(t, x):
        y = _block(x, 0, d)
        return _check_finite(_block(x, 2, d) - jff(y), "chain-rule field")

    def linearize(t, x):
        y = _block(x, 0, d)
        h = e2.copy()
        h[:, :d] -= _check_finite(np.atleast_2d(jacobian_of_jff(y)), "chain-rule Jacobian")
        return h

    return InformationOperator(d, evaluate, linearize, role="auxiliary", eval_cost=2)


def compose(scheme: OperatorScheme) -> UpdatePlan:
    """Validate a scheme and split it into the ODE operator and auxiliaries."""
    ops = list(scheme.operators)
    if not ops:
        raise NoOdeOperator("empty operator scheme")
    ode_ops = [op for op in ops if op.role == "ode"]
    if not ode_ops:
        raise NoOdeOperator("scheme has no ODE-role operator")
    if len(ode_ops) > 1:
        raise MultipleOdeOperators("scheme has more than one ODE-role operator")
    aux = tuple(op for op in ops if op.role != "ode")
    return UpdatePlan(scheme=scheme, ode_operator=ode_ops[0], auxiliaries=aux)
