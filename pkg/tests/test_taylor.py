"""Jet arithmetic against closed-form series and the ODE recursion."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pnode.errors import UnsupportedField
from pnode.taylor import Jet, jet_coefficient, propagate, propagate_dae

ORDER = 8

coeff_lists = st.lists(
    st.floats(min_value=-3, max_value=3, allow_nan=False), min_size=ORDER, max_size=ORDER
)


def geometric_jet(r, order=ORDER):
    """Series of 1 / (1 - r t)."""
    return Jet([r**k for k in range(order)])


def exp_jet(a, order=ORDER):
    """Series of exp(a t)."""
    return Jet([a**k / math.factorial(k) for k in range(order)])


@given(coeff_lists, coeff_lists)
@settings(max_examples=50, deadline=None)
def test_mul_matches_polynomial_product(a, b):
    ja, jb = Jet(a), Jet(b)
    product = np.convolve(a, b)[:ORDER]
    np.testing.assert_allclose((ja * jb).c, product, atol=1e-9)


@given(coeff_lists)
@settings(max_examples=50, deadline=None)
def test_div_inverts_mul(a):
    ja = Jet(a)
    jb = Jet(np.r_[1.5, a[1:]])  # nonzero constant term
    np.testing.assert_allclose(((ja * jb) / jb).c, ja.c, atol=1e-7)


def test_division_by_zero_constant_term_rejected():
    with pytest.raises(UnsupportedField):
        Jet([1.0, 1.0]) / Jet([0.0, 1.0])


def test_known_series_product():
    # 1/(1-t) * 1/(1+t) = 1/(1-t^2)
    left = geometric_jet(1.0) * geometric_jet(-1.0)
    expected = [1.0 if k % 2 == 0 else 0.0 for k in range(ORDER)]
    np.testing.assert_allclose(left.c, expected, atol=1e-12)


def test_integer_power_with_zero_constant_term():
    t = Jet([0.0, 1.0, 0.0, 0.0, 0.0])
    np.testing.assert_allclose((t**3).c, [0.0, 0.0, 0.0, 1.0, 0.0], atol=1e-15)


def test_real_power_against_binomial_series():
    p = 1.5
    jet = Jet([1.0, 1.0] + [0.0] * (ORDER - 2)) ** p  # (1 + t)^1.5
    expected = [math.comb(3, 0)] + [
        np.prod([p - i for i in range(k)]) / math.factorial(k) for k in range(1, ORDER)
    ]
    np.testing.assert_allclose(jet.c, expected, atol=1e-12)


def test_sqrt_squares_back():
    jet = Jet([2.0, -0.5, 0.3, 0.1, 0.0, 0.2, 0.0, -0.1])
    np.testing.assert_allclose((jet.sqrt() * jet.sqrt()).c, jet.c, atol=1e-12)


def test_real_power_needs_positive_constant_term():
    with pytest.raises(UnsupportedField):
        Jet([-1.0, 0.0]) ** 0.5


def test_jet_coefficient_on_constants():
    assert jet_coefficient(3.0, 0) == 3.0
    assert jet_coefficient(3.0, 2) == 0.0
    assert jet_coefficient(Jet([1.0, 2.0]), 1) == 2.0


def test_propagate_exponential():
    # y' = a y with y(0) = c: coefficients c a^k / k!.
    a, c = -0.5, 2.0
    coeffs = propagate(lambda y: np.array([a * y[0]], dtype=object), np.array([c]), 8)
    expected = [c * a**k / math.factorial(k) for k in range(8)]
    np.testing.assert_allclose(coeffs[:, 0], expected, rtol=1e-12)


def test_propagate_logistic_series():
    # y' = y (1 - y), y(0) = 1/2: y(t) = 1 / (1 + exp(-t)).
    coeffs = propagate(lambda y: np.array([y[0] * (1 - y[0])], dtype=object), np.array([0.5]), 8)
    from scipy.special import expit

    # Check the truncated series against the sigmoid at a small argument,
    # where the truncation error (t^8 term) is below 1e-16.
    t = 1e-2
    series = sum(c * t**k for k, c in enumerate(coeffs[:, 0]))
    assert series == pytest.approx(expit(t), abs=1e-14)


def test_propagate_dae_matches_ode_route():
    # x' = -x with a redundant algebraic copy 0 = z - x**3: the DAE route
    # must reproduce the explicit solution for x and the cube for z.
    def field(u):
        return np.array([-u[0], u[1] - u[0] ** 3], dtype=object)

    x0 = 2.0
    jac0 = np.array([[-1.0, 0.0], [-3.0 * x0**2, 1.0]])
    coeffs = propagate_dae(
        field, np.array([x0, x0**3]), np.array([True, False]), jac0, 7
    )
    expected_x = [x0 * (-1.0) ** k / math.factorial(k) for k in range(7)]
    np.testing.assert_allclose(coeffs[:, 0], expected_x, rtol=1e-12)
    # z(t) = x(t)^3 = x0^3 exp(-3t)
    expected_z = [x0**3 * (-3.0) ** k / math.factorial(k) for k in range(7)]
    np.testing.assert_allclose(coeffs[:, 1], expected_z, rtol=1e-10)


def test_propagate_dae_rejects_inconsistent_start():
    def field(u):
        return np.array([-u[0], u[1] - u[0]], dtype=object)

    with pytest.raises(UnsupportedField):
        propagate_dae(
            field,
            np.array([1.0, 5.0]),
            np.array([True, False]),
            np.array([[-1.0, 0.0], [-1.0, 1.0]]),
            4,
        )


def test_propagate_dae_rejects_higher_index():
    # Constraint not depending on the algebraic variable: index > 1.
    def field(u):
        return np.array([-u[0], u[0] - 1.0], dtype=object)

    with pytest.raises(UnsupportedField):
        propagate_dae(
            field,
            np.array([1.0, 0.0]),
            np.array([True, False]),
            np.array([[-1.0, 0.0], [1.0, 0.0]]),
            4,
        )
