"""Nonlinear reference controllers.

``brute_force_nlmpc`` enumerates every input sequence on a uniform grid
through the exact plant and power model; it is the ground truth at desk
scale.  ``iterative_nlmpc`` is a full-scale receding-horizon baseline that
solves each window by projected gradient descent on ``u`` with an adjoint
gradient of the exact cost.  ``compare`` summarizes two closed-loop runs.
"""
from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .plant import KWH, Trace, run_closed_loop
from .scenario import ComfortMax, Scenario
from .thermal import BuildingModel

MAX_ENUMERATION = 10_000_000
COMFORT_TOL = 0.05  # degC allowance when judging grid sequences feasible
THREADS_ENV = "LMPC_HVAC_THREADS"


class EnumerationError(ValueError):
    """The requested grid is too large to enumerate."""


class ScenarioMismatch(ValueError):
    """Two traces do not come from the same scenario."""


def thread_count() -> int:
    cap = os.environ.get(THREADS_ENV)
    n = os.cpu_count() or 1
    if cap:
        n = min(n, max(1, int(cap)))
    return n


# Brute force ---------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    levels: int
    horizon: int
    zones: int = 1

    def __post_init__(self):
        if self.levels < 2:
            raise ValueError("levels must be >= 2")
        if not 1 <= self.horizon <= 6:
            raise ValueError("horizon must be between 1 and 6")
        if not 1 <= self.zones <= 2:
            raise ValueError("zones must be 1 or 2")
        if self.size > MAX_ENUMERATION:
            raise EnumerationError(
                f"{self.levels}^({self.horizon}*{self.zones}) = {self.size} sequences exceeds {MAX_ENUMERATION}"
            )

    @property
    def size(self) -> int:
        return self.levels ** (self.horizon * self.zones)


@dataclass(eq=False)
class BruteForceResult:
    u: np.ndarray            # (W, m) best sequence
    cost: float              # exact energy cost of ``u``
    feasible: bool
    violation: float         # total band/cap violation of ``u`` (0 when feasible)
    evaluated: int


def _decode(idx: np.ndarray, levels: int, digits: int) -> np.ndarray:
    out = np.empty((idx.size, digits), dtype=np.int64)
    rem = idx.copy()
    for p in range(digits - 1, -1, -1):
        out[:, p] = rem % levels
        rem //= levels
    return out


def _rollout_batch(model, scenario, k, x, U, tol):
    """Exact cost and violation for a batch of sequences ``U`` of shape (N, W, m)."""
    N, W, _ = U.shape
    d = scenario.disturbances.values
    T_out = scenario.disturbances.column("T_amb")
    hv = scenario.hvac
    X = np.broadcast_to(x, (N, model.n)).copy()
    cost = np.zeros(N)
    viol = np.zeros(N)
    for j in range(W):
        t = k + j
        Uj = U[:, j, :]
        Y = X @ model.C.T
        fan = (hv.P_rated * (Uj / hv.u_rated) ** 3).sum(axis=1)
        mix = hv.d_p * Y + (1.0 - hv.d_p) * T_out[t] - model.T_s
        ph = fan + hv.c_a / hv.COP * (Uj * mix).sum(axis=1)
        cost += scenario.prices[t] * ph * scenario.tau / KWH
        viol += np.maximum(ph - scenario.P_H_max[t], 0.0) / 1000.0
        X = X @ model.A.T + (Uj * (model.T_s - Y)) @ model.B.T + model.E @ d[t]
        if t + 1 < scenario.K:
            Y = X @ model.C.T
            lo = np.maximum(scenario.T_min[t + 1] - tol - Y, 0.0)
            hi = np.maximum(Y - scenario.T_max[t + 1] - tol, 0.0)
            viol += (lo + hi).sum(axis=1)
    return cost, viol


def brute_force_nlmpc(model: BuildingModel, scenario: Scenario, grid: GridSpec, k: int = 0,
                      x=None, chunk: int = 200_000, threads: int | None = None,
                      comfort_tol: float = COMFORT_TOL) -> BruteForceResult:
    """Cheapest on-grid input sequence over steps ``k .. k+horizon-1``.

    Feasibility means the comfort band (within ``comfort_tol``) and the power
    cap hold at every step.  If nothing on the grid is feasible, the least
    violating sequence is returned with ``feasible=False``.
    """
    if grid.zones != model.m:
        raise ValueError(f"grid has {grid.zones} zones, model has {model.m}")
    W = grid.horizon
    if k + W > scenario.K:
        raise ValueError(f"horizon {W} at step {k} runs past the scenario ({scenario.K} steps)")
    x = scenario.x0 if x is None else np.asarray(x, dtype=float)
    vals = np.linspace(scenario.u_min, scenario.u_max, grid.levels)  # (levels, m)
    digits = W * model.m
    total = grid.size

    def work(start):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        dig = _decode(idx, grid.levels, digits).reshape(-1, W, model.m)
        U = vals[dig, np.arange(model.m)]
        cost, viol = _rollout_batch(model, scenario, k, x, U, comfort_tol)
        ok = viol <= 1e-12
        best = None
        if ok.any():
            c = np.where(ok, cost, np.inf)
            i = int(np.argmin(c))
            best = (float(c[i]), int(idx[i]), U[i])
        # least violation, cheapest among ties
        order = np.lexsort((cost, viol))
        i = int(order[0])
        worst = (float(viol[i]), float(cost[i]), int(idx[i]), U[i])
        return best, worst

    starts = range(0, total, chunk)
    n_threads = threads or thread_count()
    if n_threads > 1 and total > chunk:
        with ThreadPoolExecutor(n_threads) as pool:
            parts = list(pool.map(work, starts))
    else:
        parts = [work(s) for s in starts]

    feas = [p[0] for p in parts if p[0] is not None]
    if feas:
        cost, _, U = min(feas, key=lambda b: (b[0], b[1]))
        return BruteForceResult(u=U.copy(), cost=cost, feasible=True, violation=0.0, evaluated=total)
    viol, cost, _, U = min((p[1] for p in parts), key=lambda w: (w[0], w[1], w[2]))
    return BruteForceResult(u=U.copy(), cost=cost, feasible=False, violation=viol, evaluated=total)


# Iterative baseline --------------------------------------------------------

@dataclass(frozen=True)
class NLMPCConfig:
    max_iter: int = 5000
    tol: float = 1e-6
    slack_weight: float = 1e4
    patience: int = 100
    # Width (degC) of the quadratic zone of the penalty hinges.  The hinges
    # are exactly zero when the constraint holds, so a wide zone costs little
    # accuracy and keeps the problem far better conditioned for a first-order
    # method than a sharp kink.
    smoothing: float = 1.0
    energy_tiebreak: float = 1e-3
    window: int | None = None


def _huber(z, delta):
    """Smoothed ``max(z, 0)``: zero for z <= 0, quadratic on (0, delta), linear after."""
    z = np.asarray(z, dtype=float)
    val = np.where(z <= 0, 0.0, np.where(z < delta, 0.5 * z * z / delta, z - 0.5 * delta))
    der = np.where(z <= 0, 0.0, np.where(z < delta, z / delta, 1.0))
    return val, der


def _huber_abs(z, delta):
    a, da = _huber(z, delta)
    b, db = _huber(-z, delta)
    return a + b, da - db


@dataclass(frozen=True, eq=False)
class WindowProblem:
    """Data for one window: everything except the decision ``U`` (shape (W, m))."""

    model: BuildingModel
    x0: np.ndarray
    d: np.ndarray
    T_out: np.ndarray
    energy_w: np.ndarray     # weight on P_H [currency / W]
    price_w: np.ndarray      # price * tau / KWH, for the budget
    P_H_max: np.ndarray
    T_min: np.ndarray        # bands for the state after each step (NaN: unconstrained)
    T_max: np.ndarray
    T_oc: np.ndarray         # deviation targets (NaN: no deviation term)
    remaining: float         # budget left (inf for cost minimization)
    u_min: np.ndarray
    u_max: np.ndarray
    hvac: object
    config: NLMPCConfig

    @property
    def W(self) -> int:
        return self.d.shape[0]


def window_problem(model: BuildingModel, scenario: Scenario, k: int, x, config: NLMPCConfig | None = None,
                   spent: float = 0.0) -> WindowProblem:
    config = config or NLMPCConfig()
    W = scenario.window_at(k) if config.window is None else min(config.window, scenario.K - k)
    t = k + np.arange(W)
    tn = t + 1
    inside = tn < scenario.K
    tn_c = np.minimum(tn, scenario.K - 1)
    T_min = np.where(inside, scenario.T_min[tn_c], np.nan)
    T_max = np.where(inside, scenario.T_max[tn_c], np.nan)
    d = scenario.disturbances.predicted[t]
    ew = scenario.tau / KWH
    if isinstance(scenario.objective, ComfortMax):
        energy = np.full(W, config.energy_tiebreak * ew)
        occ = inside & (scenario.occupancy[tn_c] == 1)
        T_oc = np.where(occ, scenario.objective.T_oc[tn_c], np.nan)
        remaining = max(scenario.objective.budget - spent, 0.0)
    else:
        energy = np.maximum(scenario.prices[t], config.energy_tiebreak) * ew
        T_oc = np.full(W, np.nan)
        remaining = np.inf
    return WindowProblem(
        model=model, x0=np.asarray(x, dtype=float), d=d, T_out=d[:, model.ambient_index],
        energy_w=energy, price_w=scenario.prices[t] * ew, P_H_max=scenario.P_H_max[t],
        T_min=T_min, T_max=T_max, T_oc=T_oc, remaining=remaining,
        u_min=scenario.u_min, u_max=scenario.u_max, hvac=scenario.hvac, config=config,
    )


def window_objective(prob: WindowProblem, U, gradient: bool = True):
    """Penalized exact window cost and its adjoint gradient with respect to ``U``."""
    mdl, hv, cfg = prob.model, prob.hvac, prob.config
    A, B, C, E, Ts = mdl.A, mdl.B, mdl.C, mdl.E, mdl.T_s
    U = np.asarray(U, dtype=float).reshape(prob.W, mdl.m)
    W = prob.W
    M, delta = cfg.slack_weight, cfg.smoothing
    kc = hv.c_a / hv.COP

    xs = np.empty((W + 1, mdl.n))
    xs[0] = prob.x0
    ys = np.empty((W + 1, mdl.m))
    ph = np.empty(W)
    mix = np.empty((W, mdl.m))
    for j in range(W):
        ys[j] = C @ xs[j]
        mix[j] = hv.d_p * ys[j] + (1.0 - hv.d_p) * prob.T_out[j] - Ts
        ph[j] = np.sum(hv.P_rated * (U[j] / hv.u_rated) ** 3) + kc * np.sum(U[j] * mix[j])
        xs[j + 1] = A @ xs[j] + B @ (U[j] * (Ts - ys[j])) + E @ prob.d[j]
    ys[W] = C @ xs[W]

    J = float(prob.energy_w @ ph)
    cap, dcap = _huber((ph - prob.P_H_max) / 1000.0, delta)
    J += M * float(cap.sum())
    dJ_dph = prob.energy_w + M * dcap / 1000.0
    if np.isfinite(prob.remaining):
        over, dover = _huber(float(prob.price_w @ ph) - prob.remaining, delta * 1e-3)
        J += M * float(over)
        dJ_dph = dJ_dph + M * float(dover) * prob.price_w

    # penalties on the state after each step, as functions of y[j+1]
    dJ_dy = np.zeros((W + 1, mdl.m))
    band = np.isfinite(prob.T_min)
    lo, dlo = _huber(prob.T_min[band, None] - ys[1:][band], delta)
    hi, dhi = _huber(ys[1:][band] - prob.T_max[band, None], delta)
    J += M * float(lo.sum() + hi.sum())
    dJ_dy[1:][band] += M * (dhi - dlo)
    dev = np.isfinite(prob.T_oc)
    if dev.any():
        a, da = _huber_abs(ys[1:][dev] - prob.T_oc[dev, None], delta)
        J += float(a.sum())
        dJ_dy[1:][dev] += da
    if not gradient:
        return J

    grad = np.empty((W, mdl.m))
    lam = C.T @ dJ_dy[W]
    for j in range(W - 1, -1, -1):
        bl = B.T @ lam
        dph_du = 3.0 * hv.P_rated * U[j] ** 2 / hv.u_rated ** 3 + kc * mix[j]
        grad[j] = dJ_dph[j] * dph_du + bl * (Ts - ys[j])
        dy = -bl * U[j] + dJ_dph[j] * kc * hv.d_p * U[j] + dJ_dy[j]
        lam = A.T @ lam + C.T @ dy
    return J, grad


@dataclass(eq=False)
class WindowSolution:
    U: np.ndarray
    objective: float
    iterations: int
    converged: bool


def solve_window(prob: WindowProblem, U0=None) -> WindowSolution:
    """Accelerated projected gradient (FISTA) with backtracking and restarts.

    Starts from the best of ``U0``, all-minimum and all-maximum flow.  Stops
    once ``patience`` consecutive iterations each improve the objective by
    less than ``tol``, when the projected step vanishes, or at ``max_iter``.
    """
    cfg = prob.config
    lo = np.broadcast_to(prob.u_min, (prob.W, prob.model.m))
    hi = np.broadcast_to(prob.u_max, (prob.W, prob.model.m))
    starts = [lo.copy(), hi.copy()]
    if U0 is not None:
        starts.insert(0, np.clip(np.asarray(U0, dtype=float), lo, hi))
    vals = [window_objective(prob, s, gradient=False) for s in starts]
    best = int(np.argmin(vals))
    U, J = starts[best], vals[best]
    Y, t = U.copy(), 1.0
    L = 1.0
    small = 0
    for it in range(1, cfg.max_iter + 1):
        Jy, g = window_objective(prob, Y)
        while True:
            Un = np.clip(Y - g / L, lo, hi)
            step = Un - Y
            Jn = window_objective(prob, Un, gradient=False)
            if Jn <= Jy + float(np.sum(g * step)) + 0.5 * L * float(np.sum(step * step)):
                break
            L *= 2.0
            if L > 1e20:
                return WindowSolution(U, J, it, True)
        if Jn > J:
            # momentum overshot: restart from the best point
            Y, t = U.copy(), 1.0
            continue
        if not np.any(Un - U):
            return WindowSolution(U, J, it, True)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        Y = Un + (t - 1.0) / t_next * (Un - U)
        t = t_next
        improvement = J - Jn
        U, J = Un, Jn
        L *= 0.9
        small = small + 1 if improvement < cfg.tol else 0
        if small >= cfg.patience:
            return WindowSolution(U, J, it, True)
    return WindowSolution(U, J, cfg.max_iter, False)


class NLMPCController:
    """Receding-horizon nonlinear baseline, warm-started from the shifted previous plan."""

    def __init__(self, model: BuildingModel, scenario: Scenario, config: NLMPCConfig | None = None):
        self.model = model
        self.scenario = scenario
        self.config = config or NLMPCConfig()
        self.plan: np.ndarray | None = None
        self.spent = 0.0
        self.iterations: list[int] = []
        self.nonconverged = 0

    def __call__(self, k: int, x: np.ndarray) -> np.ndarray:
        sc, mdl = self.scenario, self.model
        if k == 0:
            self.plan, self.spent, self.iterations, self.nonconverged = None, 0.0, [], 0
        prob = window_problem(mdl, sc, k, x, self.config, self.spent)
        U0 = None
        if self.plan is not None:
            U0 = np.vstack([self.plan[1:], self.plan[-1:]])[: prob.W]
        sol = solve_window(prob, U0)
        self.plan = sol.U
        self.iterations.append(sol.iterations)
        self.nonconverged += not sol.converged
        u = sol.U[0].copy()
        y = mdl.C @ x
        T_out = sc.disturbances.predicted[k, mdl.ambient_index]
        mix = sc.hvac.d_p * y + (1.0 - sc.hvac.d_p) * T_out - mdl.T_s
        p = np.sum(sc.hvac.P_rated * (u / sc.hvac.u_rated) ** 3) + sc.hvac.c_a / sc.hvac.COP * np.sum(u * mix)
        self.spent += sc.prices[k] * p * sc.tau / KWH
        return u

    def summary(self) -> dict:
        return {"iterations": int(np.sum(self.iterations)), "nonconverged": int(self.nonconverged)}


def iterative_nlmpc(model: BuildingModel, scenario: Scenario, config: NLMPCConfig | None = None,
                    record_time: bool = True) -> Trace:
    ctrl = NLMPCController(model, scenario, config)
    trace = run_closed_loop(model, ctrl, scenario, record_time=record_time)
    trace.notes.update(ctrl.summary())
    return trace


# Comparison ----------------------------------------------------------------

@dataclass
class CompareReport:
    cost_a: float
    cost_b: float
    relative_gap: float          # (cost_a - cost_b) / |cost_b|
    max_temperature_deviation: float
    solver_time_a: float
    solver_time_b: float
    time_ratio: float            # solver_time_b / solver_time_a
    violations_a: int | None = None
    violations_b: int | None = None
    extra: dict = field(default_factory=dict)

    def to_json(self) -> str:
        def clean(v):
            return None if isinstance(v, float) and not np.isfinite(v) else v
        return json.dumps({k: clean(v) for k, v in asdict(self).items()}, indent=2, sort_keys=True) + "\n"

    def text(self) -> str:
        lines = [
            f"cost a            {self.cost_a:.6f}",
            f"cost b            {self.cost_b:.6f}",
            f"relative gap      {self.relative_gap:+.4%}",
            f"max |y_a - y_b|   {self.max_temperature_deviation:.4f} degC",
            f"solver time a     {self.solver_time_a:.3f} s",
            f"solver time b     {self.solver_time_b:.3f} s",
            f"time ratio b/a    {self.time_ratio:.2f}",
        ]
        if self.violations_a is not None:
            lines.append(f"band violations   a={self.violations_a} b={self.violations_b}")
        return "\n".join(lines) + "\n"


def _ratio(num: float, den: float) -> float:
    if den == 0.0:
        return 0.0 if num == 0.0 else float(np.sign(num)) * np.inf
    return num / abs(den)


def band_violations(trace: Trace, scenario: Scenario, tol: float = 1e-6) -> int:
    """Steps whose measured output lies outside ``[T_min, T_max]``."""
    y = trace.y
    lo = scenario.T_min[: trace.K, None] - tol
    hi = scenario.T_max[: trace.K, None] + tol
    return int(np.sum(np.any((y < lo) | (y > hi), axis=1)))


def compare(trace_a: Trace, trace_b: Trace, scenario: Scenario | None = None) -> CompareReport:
    if trace_a.K != trace_b.K:
        raise ScenarioMismatch(f"trace lengths differ: {trace_a.K} vs {trace_b.K}")
    if trace_a.tau != trace_b.tau:
        raise ScenarioMismatch(f"sampling intervals differ: {trace_a.tau} vs {trace_b.tau}")
    if trace_a.y.shape != trace_b.y.shape:
        raise ScenarioMismatch("zone counts differ")
    if not np.array_equal(trace_a.price, trace_b.price):
        raise ScenarioMismatch("price series differ")
    if scenario is not None and scenario.K != trace_a.K:
        raise ScenarioMismatch(f"scenario has {scenario.K} steps, traces have {trace_a.K}")
    ta, tb = trace_a.total_solver_time, trace_b.total_solver_time
    dev = float(np.max(np.abs(trace_a.y - trace_b.y), initial=0.0))
    rep = CompareReport(
        cost_a=trace_a.total_cost,
        cost_b=trace_b.total_cost,
        relative_gap=_ratio(trace_a.total_cost - trace_b.total_cost, trace_b.total_cost),
        max_temperature_deviation=dev,
        solver_time_a=ta,
        solver_time_b=tb,
        time_ratio=1.0 if ta == tb else _ratio(tb, ta),
    )
    if scenario is not None:
        rep.violations_a = band_violations(trace_a, scenario)
        rep.violations_b = band_violations(trace_b, scenario)
    return rep


__all__ = [
    "GridSpec", "BruteForceResult", "brute_force_nlmpc", "NLMPCConfig", "WindowProblem",
    "window_problem", "window_objective", "solve_window", "NLMPCController", "iterative_nlmpc",
    "CompareReport", "compare", "band_violations", "EnumerationError", "ScenarioMismatch",
]
