"""Information operators: residuals, linearizations, composition rules."""

import numpy as np
import pytest

from pnode import infoops, problems
from pnode.errors import (
    MultipleOdeOperators,
    NoOdeOperator,
    NonFiniteField,
    OrderTooLow,
)
from pnode.infoops import (
    EK0,
    EK1,
    Joint,
    Partitioned,
    chainrule_operator,
    compose,
    dae_operator,
    fd_jacobian,
    invariant_operator,
    ode1_operator,
    ode2_operator,
)


D, Q = 2, 3
DIM = D * (Q + 1)


def linear_field(y):
    return np.array([-0.5 * y[0] + 0.25 * y[1], 0.1 * y[0] - y[1]])


def linear_jac(y):
    return np.array([[-0.5, 0.25], [0.1, -1.0]])


def state_vector(rng):
    return rng.standard_normal(DIM)


def test_ode1_residual_and_linearization_ek1():
    rng = np.random.default_rng(0)
    x = state_vector(rng)
    op = ode1_operator(linear_field, linear_jac, EK1, D, Q)
    y, ydot = x[:D], x[D : 2 * D]
    np.testing.assert_allclose(op.evaluate(0.0, x), ydot - linear_field(y))
    h = op.linearize(0.0, x)
    # For a linear field the EK1 linearization is exact: z(x + dx) =
    # z(x) + H dx for any perturbation.
    dx = rng.standard_normal(DIM) * 0.1
    np.testing.assert_allclose(op.evaluate(0.0, x + dx), op.evaluate(0.0, x) + h @ dx, atol=1e-12)


def test_ode1_ek0_drops_jacobian():
    rng = np.random.default_rng(1)
    x = state_vector(rng)
    op0 = ode1_operator(linear_field, linear_jac, EK0, D, Q)
    h = op0.linearize(0.0, x)
    # EK0: derivative selector only, no field Jacobian block.
    expected = np.zeros((D, DIM))
    expected[:, D : 2 * D] = np.eye(D)
    np.testing.assert_allclose(h, expected)


def test_ode1_fd_jacobian_fallback():
    op = ode1_operator(linear_field, None, EK1, D, Q)
    op_exact = ode1_operator(linear_field, linear_jac, EK1, D, Q)
    rng = np.random.default_rng(2)
    x = state_vector(rng)
    np.testing.assert_allclose(op.linearize(0.0, x), op_exact.linearize(0.0, x), atol=1e-7)


def test_fd_jacobian_matches_exact():
    rng = np.random.default_rng(3)
    y = rng.standard_normal(2)
    np.testing.assert_allclose(fd_jacobian(linear_field, y), linear_jac(y), atol=1e-8)


def test_ode2_residual_second_derivative():
    problem = problems.load_problem("kepler")
    op = ode2_operator(problem.f, problem.jac, problem.jac_dy, EK1, 2, 3)
    rng = np.random.default_rng(4)
    x = rng.standard_normal(2 * 4)
    y, ydot, yddot = x[:2], x[2:4], x[4:6]
    np.testing.assert_allclose(op.evaluate(0.0, x), yddot - problem.f(ydot, y))


def test_ode2_requires_order_two_prior():
    problem = problems.load_problem("kepler")
    with pytest.raises(OrderTooLow):
        ode2_operator(problem.f, problem.jac, problem.jac_dy, EK1, 2, 1)


def test_dae_operator_mass_matrix_residual():
    problem = problems.load_problem("robertson")
    op = dae_operator(problem.mass, problem.f, problem.jac, 3, 2)
    rng = np.random.default_rng(5)
    x = rng.standard_normal(3 * 3)
    y, ydot = x[:3], x[3:6]
    np.testing.assert_allclose(op.evaluate(0.0, x), problem.mass @ ydot - problem.f(y))
    # Exact linearization for the affine-in-ydot residual.
    dx = 0.05 * rng.standard_normal(9)
    h = op.linearize(0.0, x)
    lin = op.evaluate(0.0, x) + h @ dx
    assert np.abs(op.evaluate(0.0, x + dx) - lin).max() < 5e-3 * max(1, np.abs(lin).max())


def test_invariant_operator_role_and_residual():
    problem = problems.load_problem("kepler")
    inv = problem.invariants
    op = invariant_operator(inv.g, inv.dg_dy, inv.dg_dydot, 2, 3, inv.dim)
    assert op.role == "auxiliary"
    x = np.zeros(8)
    x[:2] = problem.y0
    x[2:4] = problem.dy0
    np.testing.assert_allclose(op.evaluate(0.0, x), np.zeros(2), atol=1e-14)


def test_chainrule_operator_residual():
    problem = problems.load_problem("logistic")
    op = chainrule_operator(problem.f, problem.jac, problem.jac_jff, 1, 3)
    assert op.role == "auxiliary"
    assert op.eval_cost == 2
    x = np.array([0.3, 0.0, 0.0, 0.0])
    # Residual: Y2 - J_f(Y0) f(Y0).
    expected = -problem.jac(x[:1]) @ problem.f(x[:1])
    np.testing.assert_allclose(op.evaluate(0.0, x), expected)


def test_nonfinite_field_raises():
    def bad(y):
        return np.array([np.inf * y[0], y[1]])

    op = ode1_operator(bad, None, EK0, D, Q)
    with pytest.raises(NonFiniteField):
        op.evaluate(0.0, np.ones(DIM))


def test_compose_requires_exactly_one_ode_operator():
    problem = problems.load_problem("kepler")
    ode_op = ode2_operator(problem.f, problem.jac, problem.jac_dy, EK1, 2, 3)
    inv = problem.invariants
    aux = invariant_operator(inv.g, inv.dg_dy, inv.dg_dydot, 2, 3, inv.dim)

    plan = compose(Joint((ode_op, aux)))
    assert plan.joint and plan.ode_operator is ode_op and plan.auxiliaries == (aux,)

    plan = compose(Partitioned((aux, ode_op)))
    assert not plan.joint and plan.ode_operator is ode_op

    with pytest.raises(NoOdeOperator):
        compose(Joint((aux,)))
    with pytest.raises(MultipleOdeOperators):
        compose(Joint((ode_op, ode_op)))
