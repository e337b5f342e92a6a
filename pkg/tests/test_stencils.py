import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bulksurf import stencils
from bulksurf.stencils import (HistoryError, backward_difference, delay_extrapolation,
                               discrete_derivative)


def test_bdf2_quadratic():
    assert discrete_derivative("BDF2", [4.0, 1.0, 0.0], 1.0) == pytest.approx(4.0)


def test_alt_one_step_ahead():
    # values at t = 2, 1, 0 of t^2; derivative at t = 3
    assert discrete_derivative("ALT", [4.0, 1.0, 0.0], 1.0) == pytest.approx(6.0)


def test_bdf3_cubic():
    assert discrete_derivative("BDF3", [27.0, 8.0, 1.0, 0.0], 1.0) == pytest.approx(27.0)


def test_constant_history_annihilated():
    c = np.array([2.0, -1.0, 0.5])
    for v in "ABC3":
        u2, w = delay_extrapolation(v, [c] * 5, 0.1)
        np.testing.assert_allclose(u2, c, rtol=1e-15)
        np.testing.assert_allclose(w, 0.0, atol=1e-14)


def test_variant_c_linear():
    B = np.diag([2.0, 3.0])
    hist = [np.full(2, v) for v in (3.0, 2.0, 1.0, 0.0)]
    _, w = delay_extrapolation("C", hist, 1.0, Bp=B)
    np.testing.assert_allclose(w, B @ np.ones(2))


def test_third_order_extrapolation_quadratic():
    u2, _ = delay_extrapolation("3", [9.0, 4.0, 1.0, 0.0], 1.0)
    assert u2 == pytest.approx(16.0)


def _poly_values(coef, times):
    return [np.polyval(coef, t) for t in times]


# design orders: derivative stencils are exact on polynomials of this degree
EXACT_DEGREE = {"BDF2": 2, "ALT": 2, "BDF3": 3}


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4),
       st.floats(0.01, 1.0), st.floats(-2, 2))
def test_derivative_exactness(coef, tau, t0):
    for kind, deg in EXACT_DEGREE.items():
        c = np.array(coef[-(deg + 1):])
        dc = np.polyder(c)
        n = len(stencils.DERIVATIVES[kind].coeffs)
        times = [t0 - k * tau for k in range(n)]
        target = t0 + tau if kind == "ALT" else t0
        got = discrete_derivative(kind, _poly_values(c, times), tau)
        assert got == pytest.approx(np.polyval(dc, target), rel=1e-8, abs=1e-8 / tau)


# extrapolation exact to degree 1 (2nd order) or 2 (3rd order); derivative
# stencils exact to degree 1 (A), 2 (B), 2 (C), 3 (third order)
DELAY_DEGREES = {"A": (1, 1), "B": (1, 2), "C": (1, 2), "3": (2, 3)}


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4),
       st.floats(0.01, 1.0), st.floats(-2, 2))
def test_delay_exactness(coef, tau, t):
    for v, (de, dd) in DELAY_DEGREES.items():
        times = [t - k * tau for k in range(1, 5)]
        ce, cd = np.array(coef[-(de + 1):]), np.array(coef[-(dd + 1):])
        u2, _ = delay_extrapolation(v, _poly_values(ce, times), tau)
        _, w = delay_extrapolation(v, _poly_values(cd, times), tau)
        assert u2 == pytest.approx(np.polyval(ce, t), rel=1e-9, abs=1e-9)
        assert w == pytest.approx(np.polyval(np.polyder(cd), t), rel=1e-7, abs=1e-7 / tau)


def test_second_order_extrapolation_not_exact_on_quadratics():
    u2, _ = delay_extrapolation("B", [4.0, 1.0, 0.0], 1.0)
    assert u2 != pytest.approx(9.0)


def test_backward_difference():
    x = [10.0, 6.0, 3.0, 1.0]
    assert backward_difference(x, 1) == 4.0
    assert backward_difference(x, 2) == 1.0
    assert backward_difference(x, 3) == 0.0


def test_insufficient_history():
    with pytest.raises(HistoryError):
        discrete_derivative("BDF3", [1.0, 2.0], 0.1)
    with pytest.raises(HistoryError):
        delay_extrapolation("C", [1.0, 2.0, 3.0], 0.1)


def test_unknown_kinds():
    with pytest.raises(ValueError):
        discrete_derivative("BDF4", [1.0] * 5, 0.1)
    with pytest.raises(ValueError):
        delay_extrapolation("D", [1.0] * 5, 0.1)
