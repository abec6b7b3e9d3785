"""Problem registry: Jacobians vs finite differences, invariants, analytic
solutions, transforms, and the dual reference routes."""

import numpy as np
import pytest

from pnode import problems
from pnode.errors import NoAnalyticSolution, UnknownProblem
from pnode.infoops import fd_jacobian
from pnode.problems import (
    analytic_solution,
    algebraic_residual,
    first_order_transform,
    load_problem,
    reference_solution,
)

ALL_NAMES = (
    "henon_heiles",
    "kepler",
    "logistic",
    "lotka_volterra",
    "pendulum_dae",
    "pleiades",
    "robertson",
    "vanderpol",
)


@pytest.mark.parametrize("name", ALL_NAMES)
def test_registry_shapes(name):
    problem = load_problem(name)
    if problem.order == 1:
        f0 = problem.f(problem.y0)
        assert problem.dy0 is None
    else:
        f0 = problem.f(problem.dy0, problem.y0)
        assert problem.dy0.shape == problem.y0.shape
    assert f0.shape == problem.y0.shape
    assert np.isfinite(f0).all()
    t0, t1 = problem.tspan
    assert t1 > t0


def test_unknown_problem_name():
    with pytest.raises(UnknownProblem):
        load_problem("brusselator")


@pytest.mark.parametrize("name", ALL_NAMES)
def test_jacobians_match_finite_differences(name):
    problem = load_problem(name)
    rng = np.random.default_rng(1)
    y = problem.y0 + 0.1 * rng.standard_normal(problem.d)
    if name == "robertson":
        y = np.abs(y)  # keep concentrations in the physical regime
    if problem.order == 1:
        jac = problem.jac(y)
        fd = fd_jacobian(problem.f, y)
        np.testing.assert_allclose(jac, fd, rtol=2e-5, atol=2e-4 * max(1, np.abs(jac).max()))
    else:
        dy = problem.dy0 + 0.1 * rng.standard_normal(problem.d)
        jac = problem.jac(dy, y)
        fd = fd_jacobian(lambda yy: problem.f(dy, yy), y)
        np.testing.assert_allclose(jac, fd, rtol=2e-5, atol=2e-4 * max(1, np.abs(jac).max()))
        if problem.jac_dy is not None:
            fd_dy = fd_jacobian(lambda dd: problem.f(dd, y), dy)
            np.testing.assert_allclose(problem.jac_dy(dy, y), fd_dy, atol=1e-5)


@pytest.mark.parametrize("name", ("logistic", "lotka_volterra", "vanderpol"))
def test_jac_jff_matches_finite_differences(name):
    problem = load_problem(name)
    rng = np.random.default_rng(2)
    y = np.abs(problem.y0 + 0.1 * rng.standard_normal(problem.d))
    jff = lambda yy: problem.jac(yy) @ problem.f(yy)
    np.testing.assert_allclose(
        problem.jac_jff(y), fd_jacobian(jff, y), rtol=1e-4, atol=1e-4
    )


def test_invariants_vanish_on_initial_data_and_drift_off_it():
    for name in ("henon_heiles", "kepler"):
        problem = load_problem(name)
        inv = problem.invariants
        assert inv is not None
        z0 = inv.g(problem.dy0, problem.y0)
        assert np.abs(z0).max() < 1e-14
        z1 = inv.g(problem.dy0 * 1.1, problem.y0)
        assert np.abs(z1).max() > 1e-4


def test_invariant_gradients_match_finite_differences():
    problem = load_problem("kepler")
    inv = problem.invariants
    rng = np.random.default_rng(3)
    y = problem.y0 + 0.1 * rng.standard_normal(2)
    dy = problem.dy0 + 0.1 * rng.standard_normal(2)
    fd_y = fd_jacobian(lambda yy: inv.g(dy, yy), y)
    fd_dy = fd_jacobian(lambda dd: inv.g(dd, y), dy)
    np.testing.assert_allclose(inv.dg_dy(dy, y), fd_y, atol=1e-6)
    np.testing.assert_allclose(inv.dg_dydot(dy, y), fd_dy, atol=1e-6)


def test_logistic_analytic_solution():
    problem = load_problem("logistic")
    y = analytic_solution(problem, 0.0)
    np.testing.assert_allclose(y, problem.y0)
    # The sigmoid solves the ODE: y'(t) computed by finite differences.
    t = 1.3
    eps = 1e-6
    deriv = (analytic_solution(problem, t + eps) - analytic_solution(problem, t - eps)) / (
        2 * eps
    )
    np.testing.assert_allclose(deriv, problem.f(analytic_solution(problem, t)), rtol=1e-8)


def test_analytic_solution_missing():
    with pytest.raises(NoAnalyticSolution):
        analytic_solution(load_problem("vanderpol"), 1.0)


def test_first_order_transform_round_trip():
    problem = load_problem("kepler")
    fo = first_order_transform(problem)
    assert fo.order == 1 and fo.d == 4 and fo.name == "kepler_fo"
    # State layout (ydot, y): the transformed field is (f(ydot, y), ydot).
    u = np.r_[fo.y0]
    np.testing.assert_allclose(u, np.r_[problem.dy0, problem.y0])
    fu = fo.f(u)
    np.testing.assert_allclose(fu[:2], problem.f(problem.dy0, problem.y0))
    np.testing.assert_allclose(fu[2:], problem.dy0)
    np.testing.assert_allclose(fo.jac(u), fd_jacobian(fo.f, u), atol=1e-6)
    with pytest.raises(ValueError):
        first_order_transform(load_problem("logistic"))


def test_algebraic_residual_robertson():
    problem = load_problem("robertson")
    assert np.abs(algebraic_residual(problem, problem.y0)).max() < 1e-15
    bad = problem.y0 + np.array([0.0, 0.0, 0.5])
    assert np.abs(algebraic_residual(problem, bad)).max() > 0.1


def test_reference_logistic_matches_analytic():
    problem = load_problem("logistic")
    ts = np.array([0.5, 1.5, 3.0])
    ref = reference_solution(problem, ts)
    truth = np.array([analytic_solution(problem, t) for t in ts])
    np.testing.assert_allclose(ref, truth, rtol=1e-9, atol=1e-12)


def test_reference_robertson_companion_route():
    # The stiff DAE reference comes from an equivalent explicit-ODE
    # formulation; mass balance must hold and the long-time limit decay.
    problem = load_problem("robertson")
    ref = reference_solution(problem, np.array([100.0]))
    assert abs(ref[0].sum() - 1.0) < 1e-9
    assert ref[0, 0] < 1.0 and ref[0, 0] > 0.5


def test_reference_pendulum_companion_satisfies_constraints():
    problem = load_problem("pendulum_dae")
    ts = np.array([2.5, 7.0])
    ref = reference_solution(problem, ts)
    for row in ref:
        # Unit-length rod in (x, z) coordinates.
        assert abs(row[0] ** 2 + row[2] ** 2 - 1.0) < 1e-9
        assert np.abs(algebraic_residual(problem, row)).max() < 1e-7


def test_reference_second_order_problem():
    problem = load_problem("kepler").with_tspan((0.0, 4.0))
    ref = reference_solution(problem, np.array([4.0]))
    assert ref.shape == (1, 2)
    # Energy at the reference endpoint matches the initial energy.
    # Velocities are not returned, so check position magnitude sanity only.
    assert np.isfinite(ref).all() and np.abs(ref).max() < 3.0


def test_reference_cache_hits():
    problem = load_problem("logistic")
    ts = np.array([1.0, 2.0])
    a = reference_solution(problem, ts)
    b = reference_solution(problem, ts)
    np.testing.assert_array_equal(a, b)
