import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dmf_landscape.scalar import (
    RootKind,
    RootLabel,
    UnsupportedDepth,
    eval_f,
    eval_f_dx,
    eval_f_dxx,
    eval_g,
    eval_g_dx,
    lambda_critical,
    positive_roots,
    root_profile,
    scalar_argmin_g,
    sweep_profiles,
    thresholds,
)

# Frozen oracle values (L = 3, lam = 1), from numpy.roots on the factored
# polynomials x^3 + x^2 + x - 1 and x^4 - 3x + 1, and scipy fsolve on f = f_x = 0.
X_UNDER_2 = 0.5436890126920764
FDX_UNDER_2 = -0.7378659238475418
X_BAR_3 = 1.30748610096198
G_MIN_3 = 5.7135192662050756
LAM_CRIT_Y1 = 0.10546875


def test_f_vanishes_at_zero():
    for y in (0.0, 1.0, 7.5):
        assert eval_f(0.0, y, 0.3, 4) == 0.0


def test_f_arithmetic():
    assert eval_f(1.0, 2.0, 1.0, 3) == 0.0
    assert eval_f_dx(X_UNDER_2, 2.0, 1.0, 3) == pytest.approx(FDX_UNDER_2, rel=1e-10)


@pytest.mark.parametrize("L", [2, 3, 4, 6])
def test_derivatives_match_fd(L):
    x, y, lam, h = 0.8, 1.7, 0.4, 1e-6
    fd1 = (eval_f(x + h, y, lam, L) - eval_f(x - h, y, lam, L)) / (2 * h)
    fd2 = (eval_f_dx(x + h, y, lam, L) - eval_f_dx(x - h, y, lam, L)) / (2 * h)
    fdg = (eval_g(x + h, y, lam, L) - eval_g(x - h, y, lam, L)) / (2 * h)
    assert eval_f_dx(x, y, lam, L) == pytest.approx(fd1, rel=1e-7)
    assert eval_f_dxx(x, y, lam, L) == pytest.approx(fd2, rel=1e-7)
    assert eval_g_dx(x, y, lam, L) == pytest.approx(fdg, rel=1e-7)


def test_thresholds_closed_form():
    th = thresholds(1.0, 3)
    assert th.x_star == pytest.approx(3 ** -0.25, abs=1e-12)
    assert th.y_star == pytest.approx(3 ** -0.75 + 3 ** 0.25, abs=1e-12)
    # x*^4 - y* x* + 1 = 1/3 - 4/3 + 1
    assert th.x_star**4 - th.y_star * th.x_star + 1 == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("L", [3, 4, 5, 8])
@pytest.mark.parametrize("lam", [1e-6, 0.3, 1.0, 20.0])
def test_threshold_is_double_root(L, lam):
    th = thresholds(lam, L)
    scale = 1 + lam
    assert abs(eval_f(th.x_star, th.y_star, lam, L)) <= 1e-10 * scale
    assert abs(eval_f_dx(th.x_star, th.y_star, lam, L)) <= 1e-10 * scale


@pytest.mark.parametrize("L", [3, 4, 7])
def test_threshold_scaling(L):
    a, b = thresholds(2.0 ** (2 * L - 2), L), thresholds(1.0, L)
    assert a.x_star == pytest.approx(2 * b.x_star, rel=1e-14)
    assert a.y_star == pytest.approx(2 * b.y_star, rel=1e-14)


def test_thresholds_reject_depth_two():
    with pytest.raises(UnsupportedDepth):
        thresholds(1.0, 2)
    with pytest.raises(UnsupportedDepth):
        lambda_critical(1.0, 2)


def test_root_profiles_depth_three():
    assert root_profile(1.0, 1.0, 3).kind is RootKind.NONE
    p = root_profile(2.0, 1.0, 3)
    assert p.kind is RootKind.TWO
    assert p.x_bar == pytest.approx(1.0, abs=1e-10)
    assert p.x_under == pytest.approx(X_UNDER_2, abs=1e-10)
    assert [lab for _, lab in p.labelled_roots()] == [RootLabel.S1, RootLabel.S2]
    ys = thresholds(1.0, 3).y_star
    u = root_profile(ys, 1.0, 3)
    assert u.kind is RootKind.UNIQUE
    assert u.x_hat == pytest.approx(3 ** -0.25, abs=1e-12)
    assert u.labelled_roots()[0][1] is RootLabel.S3


def test_equality_band_configurable():
    ys = thresholds(1.0, 3).y_star
    assert root_profile(ys * (1 + 1e-7), 1.0, 3).kind is RootKind.TWO
    assert root_profile(ys * (1 + 1e-7), 1.0, 3, eq_tol=1e-6).kind is RootKind.UNIQUE
    assert root_profile(ys * (1 - 1e-7), 1.0, 3).kind is RootKind.NONE


def test_depth_two_closed_form():
    p = root_profile(5.0, 1.0, 2)
    assert p.kind is RootKind.UNIQUE and p.x_hat == 2.0
    assert root_profile(5.0, 36.0, 2).kind is RootKind.NONE


@settings(max_examples=1000, deadline=None)
@given(st.floats(1e-3, 50.0), st.floats(1e-4, 10.0), st.integers(3, 6))
def test_roots_are_roots(y, lam, L):
    p = root_profile(y, lam, L)
    th = thresholds(lam, L)
    for x, lab in p.labelled_roots():
        assert abs(eval_f(x, y, lam, L)) <= 1e-10 * (1 + lam)
        fx = eval_f_dx(x, y, lam, L)
        if lab is RootLabel.S1:
            assert fx > 0
        elif lab is RootLabel.S2:
            assert fx < 0
    if p.kind is RootKind.TWO:
        assert p.x_bar > th.x_star > p.x_under


@pytest.mark.parametrize("L", [3, 4, 5, 6])
def test_root_monotonicity_in_y(L):
    lam = 0.7
    ys = np.linspace(thresholds(lam, L).y_star * 1.001, 30, 300)
    profs = sweep_profiles(ys, lam, L)
    bars = np.array([p.x_bar for p in profs])
    unders = np.array([p.x_under for p in profs])
    assert np.all(np.diff(bars) > 0)
    assert np.all(np.diff(unders) < 0)


@pytest.mark.parametrize("L", [3, 4, 6])
def test_double_root_curvature(L):
    lam = 0.2
    th = thresholds(lam, L)
    x = root_profile(th.y_star, lam, L).x_hat
    assert abs(eval_f_dx(x, th.y_star, lam, L)) <= 1e-8
    assert eval_f_dxx(x, th.y_star, lam, L) > 0


def test_argmin_tie_at_two():
    res = scalar_argmin_g(2.0, 1.0, 3)
    assert res.tie
    np.testing.assert_allclose(res.argmin_set, [1.0, 0.0], atol=1e-12)
    assert res.min_value == pytest.approx(4.0, abs=1e-12)
    # grid oracle: two separated minima at the same level
    xs = np.arange(0, 3, 1e-5)
    g = (xs**3 - 2) ** 2 + 3 * xs**2
    assert g.min() == pytest.approx(4.0, abs=1e-8)
    assert g[0] == pytest.approx(4.0) and g[100000] == pytest.approx(4.0)


def test_argmin_at_three():
    res = scalar_argmin_g(3.0, 1.0, 3)
    assert not res.tie
    assert res.argmin_set[0] == pytest.approx(X_BAR_3, abs=1e-10)
    assert res.min_value == pytest.approx(G_MIN_3, abs=1e-10)
    assert res.min_value < eval_g(0.0, 3.0, 1.0, 3) == 9.0


def test_argmin_at_threshold_is_zero():
    ys = thresholds(1.0, 3).y_star
    res = scalar_argmin_g(ys, 1.0, 3)
    assert res.argmin_set == (0.0,)
    assert res.min_value == pytest.approx(ys**2)
    assert eval_g(3 ** -0.25, ys, 1.0, 3) == pytest.approx(math.sqrt(12), rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 6.0), st.floats(0.05, 4.0), st.integers(2, 5))
def test_argmin_agrees_with_grid(y, lam, L):
    res = scalar_argmin_g(y, lam, L)
    hi = (math.sqrt(lam) * y) ** (1 / L) + 1
    xs = np.arange(0, hi, 1e-5)
    g = (xs**L - math.sqrt(lam) * y) ** 2 + lam * L * xs**2
    assert res.min_value <= g.min() + 1e-12
    # grid spacing bounds the gap by the curvature times (h/2)^2
    assert g.min() - res.min_value <= 1e-8 * max(1.0, lam * L * hi**2)
    for x in res.argmin_set:
        assert x == 0.0 or abs(eval_f(x, y, lam, L)) <= 1e-9 * (1 + lam)


def test_lambda_critical_values():
    ys = thresholds(1.0, 3).y_star
    assert lambda_critical(ys, 3) == pytest.approx(1.0, rel=1e-13)
    assert lambda_critical(1.0, 3) == pytest.approx(LAM_CRIT_Y1, rel=1e-12)
    for L in (3, 4, 5):
        assert lambda_critical(2.4, L) == pytest.approx(
            2 ** (2 * (L - 1)) * lambda_critical(1.2, L), rel=1e-13)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 20.0), st.integers(3, 6))
def test_lambda_critical_gives_double_root(y, L):
    lam = lambda_critical(y, L)
    assert root_profile(y, lam, L).kind is RootKind.UNIQUE


def test_positive_roots_empty_for_zero_data():
    assert positive_roots(0.0, 1.0, 3) == []
    assert positive_roots(0.0, 1.0, 2) == []
