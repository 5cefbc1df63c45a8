import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lmpc_hvac.linearize import (
    ConvexityError, PWLApprox, build_pwl, check_convex_fill, degenerate_pwl, freeze_outputs,
    linearized_chiller_row, linearized_fan_coefficient, map_bounds_initial, map_bounds_receding,
    recover_air_mass_flow, to_linearized_input,
)
from lmpc_hvac.power import HvacParams, chiller_power, fan_power

P = HvacParams(P_rated=[600.0], u_rated=[1.0], COP=3.0, d_p=0.0)
T_S = np.array([10.0])


def test_to_linearized_example():
    assert to_linearized_input([0.5], [25.0], T_S)[0] == -7.5


def test_recover_example_and_guard():
    u, flag = recover_air_mass_flow([-7.5], [25.0], T_S)
    assert u[0] == 0.5 and not flag[0]
    u, flag = recover_air_mass_flow([-0.1], [10.3], T_S, eps=0.5)
    assert u[0] == 0.0 and flag[0]


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        to_linearized_input([0.5, 0.1], [25.0], T_S)


def test_initial_bounds_sign_rule():
    b = map_bounds_initial([0.0], [1.0], [25.0], T_S, W=3)
    assert b.W == 3
    np.testing.assert_array_equal(b.v_min, [[-15.0]] * 3)
    np.testing.assert_array_equal(b.v_max, [[0.0]] * 3)
    b = map_bounds_initial([0.0], [1.0], [5.0], T_S, W=2)
    np.testing.assert_array_equal(b.v_min, [[0.0]] * 2)
    np.testing.assert_array_equal(b.v_max, [[5.0]] * 2)


def test_guarded_bounds_collapse():
    b = map_bounds_initial([0.0], [1.0], [10.2], T_S, W=2)
    assert np.all(b.v_min == 0) and np.all(b.v_max == 0) and b.guarded.all()


def test_receding_bounds_per_offset():
    frozen = [[25.0], [20.0], [5.0]]
    b = map_bounds_receding([0.2], [1.0], frozen, T_S)
    np.testing.assert_allclose(b.v_min[:, 0], [-15.0, -10.0, 1.0])
    np.testing.assert_allclose(b.v_max[:, 0], [-3.0, -2.0, 5.0])
    b = map_bounds_receding([0.0], [1.0], frozen, T_S, y_measured=[24.0])
    assert b.v_min[0, 0] == -14.0


def test_receding_reduces_to_initial():
    y0 = np.array([23.0, 27.0])
    T_s = np.array([10.0, 12.0])
    a = map_bounds_initial([0.0, 0.1], [1.0, 2.0], y0, T_s, W=4)
    b = map_bounds_receding([0.0, 0.1], [1.0, 2.0], np.tile(y0, (4, 1)), T_s)
    np.testing.assert_array_equal(a.v_min, b.v_min)
    np.testing.assert_array_equal(a.v_max, b.v_max)


def test_freeze_outputs():
    np.testing.assert_array_equal(freeze_outputs(True, [22.0], W=3), [[22.0]] * 3)
    prev = [[24.0], [23.0], [22.0], [21.0]]
    np.testing.assert_array_equal(freeze_outputs(False, [0.0], prev)[:, 0], [23.0, 22.0, 21.0, 21.0])
    # shrinking window at the end of the scenario
    np.testing.assert_array_equal(freeze_outputs(False, [0.0], prev, W=2)[:, 0], [23.0, 22.0])
    with pytest.raises(ValueError):
        freeze_outputs(False, [0.0])
    with pytest.raises(ValueError):
        freeze_outputs(True, [0.0])


def test_pwl_three_segments():
    pwl = build_pwl(-15.0, 0.0, 3)
    np.testing.assert_array_equal(pwl.breakpoints, [-15.0, -10.0, -5.0, 0.0])
    np.testing.assert_array_equal(pwl.df, [2375.0, 875.0, 125.0])
    np.testing.assert_array_equal(pwl.cumulative, [-3375.0, -1000.0, -125.0, 0.0])
    assert pwl.segments == 3


def test_pwl_single_segment_midpoint_error():
    pwl = build_pwl(0.0, 1.0, 1)
    assert pwl(0.5) == pytest.approx(0.5)
    assert pwl.max_error >= 0.375
    # the secant error of v**3 on [0, 1] peaks at v = 1/sqrt(3)
    assert pwl.max_error == pytest.approx(2 / (3 * np.sqrt(3)), rel=1e-9)


def test_pwl_rejects_bad_domain():
    with pytest.raises(ValueError):
        build_pwl(1.0, 0.0, 4)
    with pytest.raises(ValueError):
        build_pwl(0.0, 1.0, 0)


def test_degenerate_pwl():
    pwl = degenerate_pwl(-2.0, 4)
    assert pwl.segments == 4 and np.all(pwl.dv == 0) and pwl(-2.0) == pytest.approx(-8.0)


def test_fill_is_in_order():
    pwl = build_pwl(-15.0, 0.0, 3)
    np.testing.assert_allclose(pwl.fill(-7.5), [1.0, 0.5, 0.0])


def test_fan_coefficient_example():
    c, guarded = linearized_fan_coefficient(0, 25.0, P, 10.0)
    assert c == pytest.approx(600 / (-15) ** 3) and c == pytest.approx(-0.17778, abs=1e-5)
    assert not guarded
    assert linearized_fan_coefficient(0, 10.2, P, 10.0) == (0.0, True)
    # coefficient * v**3 reproduces the cubic fan law at the frozen output
    assert c * (-7.5) ** 3 == pytest.approx(fan_power(0.5, P))


def test_chiller_row_example():
    coef, guarded = linearized_chiller_row([25.0], 30.0, P, T_S)
    assert coef[0] == pytest.approx(1005 / 3 * 20 / -15) and coef[0] == pytest.approx(-446.67, abs=5e-3)
    assert coef[0] * -7.5 == pytest.approx(3350.0)
    assert coef[0] * -7.5 == pytest.approx(chiller_power([0.5], [25.0], 30.0, P, T_S))
    assert not guarded[0]


def test_convexity_certificate():
    # c < 0 on a negative domain is convex, on a positive domain it is not
    check_convex_fill(build_pwl(-15.0, 0.0, 8), -0.17778)
    with pytest.raises(ConvexityError):
        check_convex_fill(build_pwl(0.0, 5.0, 8), -0.17778)


@settings(max_examples=1000, deadline=None)
@given(st.floats(0, 5), st.floats(-10, 45), st.floats(5, 15))
def test_recover_round_trip(u, y, T_s):
    if abs(T_s - y) < 0.5:
        return
    v = to_linearized_input([u], [y], [T_s])
    back, flag = recover_air_mass_flow(v, [y], [T_s])
    assert not flag[0]
    assert back[0] == pytest.approx(u, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(5, 40), st.floats(0, 2), st.floats(0, 2))
def test_bounds_ordered_and_contain_box_image(u1, u2, y, a, b):
    u_min, u_max = min(a, b), max(a, b)
    bd = map_bounds_initial([u_min], [u_max], [y], T_S, W=1)
    assert bd.v_min[0, 0] <= bd.v_max[0, 0]
    if not bd.guarded[0, 0]:
        for u in np.linspace(u_min, u_max, 7):
            v = u * (10.0 - y)
            assert bd.v_min[0, 0] - 1e-12 <= v <= bd.v_max[0, 0] + 1e-12


@settings(max_examples=200, deadline=None)
@given(st.floats(-40, 40), st.floats(0.01, 40), st.integers(1, 32))
def test_pwl_exact_at_breakpoints(lo, width, L):
    pwl = build_pwl(lo, lo + width, L)
    h = pwl.breakpoints
    assert h[0] == lo and h[-1] == pytest.approx(lo + width)
    np.testing.assert_allclose(pwl.cumulative, h ** 3, rtol=1e-12, atol=1e-12 * max(1.0, np.max(np.abs(h)) ** 3))
    assert np.all(np.diff(pwl.cumulative) > 0)
    assert np.all(pwl.dv > 0)
    # dense sampling never exceeds the analytic bound
    v = np.linspace(h[0], h[-1], 2001)
    assert np.max(np.abs(pwl(v) - v ** 3)) <= pwl.max_error * (1 + 1e-9) + 1e-9


@settings(max_examples=200, deadline=None)
@given(st.floats(12, 35), st.floats(0, 1))
def test_fan_consistency_at_frozen_output(y, u):
    if abs(10.0 - y) < 0.5:
        return
    v = u * (10.0 - y)
    lo, hi = sorted((0.0, 1.0 * (10.0 - y)))
    pwl = build_pwl(lo, hi, 16)
    c, _ = linearized_fan_coefficient(0, y, P, 10.0)
    assert abs(c * pwl(v) - fan_power(u, P)) <= abs(c) * pwl.max_error * (1 + 1e-9) + 1e-9
