"""A small solver-agnostic LP container and its HiGHS backend.

Variables are registered in named blocks; rows are sparse linear
constraints with a sense of ``"<="``, ``">="`` or ``"=="``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

FEAS_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class RowGroup:
    """Rows sharing a name and sense; row ``r`` is ``coef[r] @ x[idx[r]] <sense> rhs[r]``.

    ``shape`` is the index shape used to name the rows (``name[j,i]``); a
    scalar group has shape ``()`` and a single row.
    """

    name: str
    shape: tuple
    idx: np.ndarray
    coef: np.ndarray
    sense: str
    rhs: np.ndarray

    @property
    def size(self) -> int:
        return self.rhs.size

    def row_names(self) -> list[str]:
        if not self.shape:
            return [self.name]
        return [f"{self.name}[{','.join(map(str, pos))}]" for pos in np.ndindex(*self.shape)]


class LPProblem:
    def __init__(self):
        self._lb: list[np.ndarray] = []
        self._ub: list[np.ndarray] = []
        self._cost: list[np.ndarray] = []
        self._nvars = 0
        self.blocks: dict[str, np.ndarray] = {}
        self.groups: list[RowGroup] = []
        self.meta: dict = {}

    @property
    def num_vars(self) -> int:
        return self._nvars

    @property
    def num_rows(self) -> int:
        return sum(g.size for g in self.groups)

    @property
    def lb(self) -> np.ndarray:
        return np.concatenate(self._lb) if self._lb else np.zeros(0)

    @property
    def ub(self) -> np.ndarray:
        return np.concatenate(self._ub) if self._ub else np.zeros(0)

    @property
    def cost(self) -> np.ndarray:
        return np.concatenate(self._cost) if self._cost else np.zeros(0)

    def add_block(self, name: str, shape, lb=-np.inf, ub=np.inf, cost=0.0) -> np.ndarray:
        """Register ``prod(shape)`` variables and return their index array."""
        shape = tuple(np.atleast_1d(shape))
        size = int(np.prod(shape))
        idx = np.arange(self._nvars, self._nvars + size).reshape(shape)
        for store, val in ((self._lb, lb), (self._ub, ub), (self._cost, cost)):
            store.append(np.broadcast_to(np.asarray(val, dtype=float), shape).ravel().copy())
        self._nvars += size
        self.blocks[name] = idx
        return idx

    def add_cost(self, idx, coef) -> None:
        c = self.cost
        np.add.at(c, np.ravel(idx), np.broadcast_to(coef, np.shape(np.ravel(idx))))
        self._cost = [c]

    def add_rows(self, name: str, shape, idx, coef, sense: str, rhs) -> None:
        """Add a group of rows; ``idx``/``coef`` have shape ``shape + (terms,)``.

        Zero coefficients are padding and are ignored.
        """
        if sense not in ("<=", ">=", "=="):
            raise ValueError(f"bad sense {sense!r}")
        shape = tuple(shape)
        rows = int(np.prod(shape)) if shape else 1
        idx = np.asarray(idx, dtype=int).reshape(rows, -1)
        coef = np.asarray(coef, dtype=float)
        coef = np.broadcast_to(coef if coef.size == 1 else coef.reshape(rows, -1), idx.shape).copy()
        if idx.size and (idx.min() < 0 or idx.max() >= self.num_vars):
            raise IndexError(f"rows {name} reference an undeclared variable")
        rhs = np.asarray(rhs, dtype=float)
        rhs = rhs.reshape(rows).copy() if rhs.size == rows else np.broadcast_to(rhs, (rows,)).copy()
        self.groups.append(RowGroup(name, shape, idx, coef, sense, rhs))

    def add_row(self, name: str, idx, coef, sense: str, rhs: float) -> None:
        idx = np.asarray(idx, dtype=int).ravel()
        coef = np.broadcast_to(np.asarray(coef, dtype=float), idx.shape)
        self.add_rows(name, (), idx[None, :], coef[None, :], sense, rhs)

    @property
    def rows(self) -> list[tuple[str, np.ndarray, np.ndarray, str, float]]:
        """Every row as ``(name, idx, coef, sense, rhs)`` with padding removed."""
        out = []
        for g in self.groups:
            for r, nm in enumerate(g.row_names()):
                keep = g.coef[r] != 0.0
                out.append((nm, g.idx[r][keep], g.coef[r][keep], g.sense, float(g.rhs[r])))
        return out

    def _matrix(self, groups):
        if not groups:
            return None, None
        data, ri, ci, rhs = [], [], [], []
        offset = 0
        for g in groups:
            sign = -1.0 if g.sense == ">=" else 1.0
            keep = g.coef != 0.0
            r = np.broadcast_to(np.arange(g.size)[:, None] + offset, g.idx.shape)
            data.append(sign * g.coef[keep])
            ri.append(r[keep])
            ci.append(g.idx[keep])
            rhs.append(sign * g.rhs)
            offset += g.size
        mat = sparse.csr_matrix(
            (np.concatenate(data), (np.concatenate(ri), np.concatenate(ci))),
            shape=(offset, self.num_vars),
        )
        return mat, np.concatenate(rhs)

    def arrays(self):
        A_ub, b_ub = self._matrix([g for g in self.groups if g.sense != "=="])
        A_eq, b_eq = self._matrix([g for g in self.groups if g.sense == "=="])
        bounds = np.column_stack([self.lb, self.ub]) if self.num_vars else np.zeros((0, 2))
        return self.cost, A_ub, b_ub, A_eq, b_eq, bounds

    def row_activity(self, values: np.ndarray) -> np.ndarray:
        """Left-hand sides in row order."""
        if not self.groups:
            return np.zeros(0)
        return np.concatenate([np.sum(g.coef * values[g.idx], axis=1) for g in self.groups])

    def violation(self, values: np.ndarray) -> float:
        """Largest row or bound violation of ``values``."""
        viol = 0.0
        for g in self.groups:
            a = np.sum(g.coef * values[g.idx], axis=1)
            if g.sense == "<=":
                d = a - g.rhs
            elif g.sense == ">=":
                d = g.rhs - a
            else:
                d = np.abs(a - g.rhs)
            viol = max(viol, float(np.max(d, initial=0.0)))
        viol = max(viol, float(np.max(self.lb - values, initial=0.0)),
                   float(np.max(values - self.ub, initial=0.0)))
        return viol

    @property
    def names(self) -> list[str]:
        names = [""] * self.num_vars
        for bname, idx in self.blocks.items():
            for pos in np.ndindex(*idx.shape):
                names[int(idx[pos])] = f"{bname}[{','.join(map(str, pos))}]"
        return names

    def dump(self) -> str:
        """Human-readable listing: objective, one ``name: lhs <= rhs`` per row, bounds."""
        names = self.names
        cost, lb, ub = self.cost, self.lb, self.ub

        def term(c, i):
            return f"{c:+.10g}*{names[i]}"

        out = ["minimize: " + " ".join(term(c, i) for i, c in enumerate(cost) if c != 0.0)]
        for (name, idx, coef, sense, rhs) in self.rows:
            lhs = " ".join(term(c, i) for c, i in zip(coef, idx)) or "0"
            out.append(f"{name}: {lhs} {sense} {rhs:.10g}")
        for i, nm in enumerate(names):
            out.append(f"bound {nm}: {lb[i]:.10g} <= {nm} <= {ub[i]:.10g}")
        return "\n".join(out) + "\n"


@dataclass(eq=False)
class SolveResult:
    status: str
    values: np.ndarray
    objective: float
    blocks: dict = field(default_factory=dict)
    max_violation: float = 0.0
    message: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"

    def block(self, name: str) -> np.ndarray:
        return self.values[self.blocks[name]]

    @property
    def v(self) -> np.ndarray:
        return self.block("v")

    @property
    def y_pred(self) -> np.ndarray:
        """Predicted outputs ``y[k+j|k]`` for ``j = 0..W-1``."""
        return self.extra["y_pred"]


def solve_step(lp: LPProblem) -> SolveResult:
    """Solve with HiGHS dual simplex (deterministic, single-threaded)."""
    c, A_ub, b_ub, A_eq, b_eq, bounds = lp.arrays()
    res = linprog(
        c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
        method="highs-ds", options={"presolve": True},
    )
    if res.status == 0:
        status = "optimal"
    elif res.status == 2:
        status = "infeasible"
    else:
        status = "numerical-failure"
    if res.x is None:
        return SolveResult(status=status, values=np.full(lp.num_vars, np.nan), objective=np.nan,
                           blocks=lp.blocks, max_violation=np.inf, message=res.message)
    vals = np.asarray(res.x, dtype=float)
    return SolveResult(status=status, values=vals, objective=float(res.fun), blocks=lp.blocks,
                       max_violation=lp.violation(vals), message=res.message)
