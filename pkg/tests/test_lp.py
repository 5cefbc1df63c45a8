import numpy as np
import pytest

from lmpc_hvac.lp import LPProblem, solve_step


def test_trivial_lp():
    lp = LPProblem()
    x = lp.add_block("x", 1, lb=0.0, ub=1.0, cost=1.0)
    res = solve_step(lp)
    assert res.optimal and res.objective == 0.0 and res.block("x")[0] == 0.0
    assert x.tolist() == [0]


def test_rows_and_dump():
    lp = LPProblem()
    x = lp.add_block("x", (2,), lb=0.0, cost=[1.0, 2.0])
    lp.add_row("cover", x, [1.0, 1.0], ">=", 3.0)
    lp.add_rows("cap", (2,), x[:, None], 1.0, "<=", [2.0, 5.0])
    res = solve_step(lp)
    assert res.optimal
    np.testing.assert_allclose(res.block("x"), [2.0, 1.0])
    assert res.objective == pytest.approx(4.0)
    assert res.max_violation <= 1e-9
    text = lp.dump()
    assert "cover: +1*x[0] +1*x[1] >= 3" in text
    assert "cap[1]: +1*x[1] <= 5" in text
    assert lp.num_rows == 3 and lp.names == ["x[0]", "x[1]"]


def test_padding_is_ignored():
    lp = LPProblem()
    x = lp.add_block("x", 2)
    lp.add_rows("r", (1,), [[x[0], x[1], x[0]]], [[1.0, 1.0, 0.0]], "==", 1.0)
    name, idx, coef, sense, rhs = lp.rows[0]
    assert idx.tolist() == [0, 1] and coef.tolist() == [1.0, 1.0]


def test_undeclared_variable_rejected():
    lp = LPProblem()
    lp.add_block("x", 1)
    with pytest.raises(IndexError):
        lp.add_row("bad", [3], [1.0], "<=", 0.0)
    with pytest.raises(ValueError):
        lp.add_row("bad", [0], [1.0], "<", 0.0)


def test_infeasible_reported():
    lp = LPProblem()
    x = lp.add_block("x", 1, lb=0.0, ub=1.0)
    lp.add_row("impossible", x, [1.0], ">=", 2.0)
    assert solve_step(lp).status == "infeasible"


def test_violation_measure():
    lp = LPProblem()
    x = lp.add_block("x", 2, lb=0.0, ub=1.0)
    lp.add_row("sum", x, [1.0, 1.0], "==", 1.0)
    assert lp.violation(np.array([0.5, 0.5])) == 0.0
    assert lp.violation(np.array([1.5, 0.5])) == pytest.approx(1.0)
