"""The nine acceptance criteria at their stated tolerances.

Each test prints one PASS/FAIL line; the lines are repeated in the pytest
terminal summary.
"""
import pytest

from lmpc_hvac import acceptance

from conftest import ACCEPTANCE_LINES


def check(number):
    res = acceptance.CRITERIA[number]()
    line = res.line()
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert res.passed, line


def test_criterion_1_model_reconstruction():
    check(1)


def test_criterion_2_input_round_trip():
    check(2)


def test_criterion_3_pwl_fidelity():
    check(3)


def test_criterion_4_lp_vs_brute_force():
    check(4)


@pytest.mark.slow
def test_criterion_5_cost_gap_and_speedup():
    check(5)


def test_criterion_6_comfort_and_idle():
    check(6)


def test_criterion_7_budgeted_comfort():
    check(7)


def test_criterion_8_gradient():
    check(8)


def test_criterion_9_determinism():
    check(9)
