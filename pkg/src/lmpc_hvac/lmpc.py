"""Linearized MPC: one LP per sampling step, applied in receding horizon.

Each solve works in the linearized input ``v``.  Outputs in the power and
bound terms are frozen at the previous solve's prediction (or the measured
output on the first solve), which leaves a purely linear problem:

* linear dynamics rolled out from the measured state,
* comfort band with penalized slack,
* ``v`` bounds mapped from the ``u`` box,
* chiller power linear in ``v``, fan power ``c * v**3`` through an
  incremental piecewise-linear channel,
* ``0 <= P_H <= P_H_max`` and the scenario objective.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linearize import (
    DEFAULT_EPS, DEFAULT_SEGMENTS, MappedBounds, PWLApprox, check_convex_fill, freeze_outputs,
    linearized_chiller_row, linearized_fan_coefficient, map_bounds_initial, map_bounds_receding, recover_air_mass_flow,
)
from .lp import LPProblem, SolveResult, solve_step
from .plant import KWH, Trace, plant_step, run_closed_loop
from .power import total_power
from .scenario import ComfortMax, Scenario
from .thermal import BuildingModel


@dataclass(frozen=True)
class LMPCConfig:
    segments: int = DEFAULT_SEGMENTS
    eps: float = DEFAULT_EPS
    slack_weight: float = 1e4
    # Small positive energy weight so the PWL segments always fill in order,
    # even where the objective does not price energy.
    energy_tiebreak: float = 1e-3
    window: int | None = None


def build_channels(bounds: MappedBounds, frozen: np.ndarray, scenario: Scenario,
                   T_s: np.ndarray, config: LMPCConfig):
    """PWL models and fan coefficients for every offset and zone."""
    W, m = bounds.v_min.shape
    hv = scenario.hvac
    lo, hi = bounds.v_min, bounds.v_max
    gap = T_s[None, :] - frozen
    guarded = np.abs(gap) < config.eps
    fan_coef = np.where(guarded, 0.0, hv.P_rated / (np.where(guarded, 1.0, gap) * hv.u_rated) ** 3)
    flat = guarded | (hi - lo <= 1e-12 * np.maximum(1.0, np.abs(lo)))
    mid = 0.5 * (lo + hi)
    frac = np.linspace(0.0, 1.0, config.segments + 1)
    bp = np.where(flat[..., None], mid[..., None], lo[..., None] + (hi - lo)[..., None] * frac)
    bp[..., 0] = np.where(flat, mid, lo)
    bp[..., -1] = np.where(flat, mid, hi)
    pwl = [[PWLApprox(bp[j, i]) for i in range(m)] for j in range(W)]
    # segment slopes of c * v**3 must not decrease
    a, b = bp[..., :-1], bp[..., 1:]
    slopes = fan_coef[..., None] * (a * a + a * b + b * b)
    tol = 1e-9 * np.maximum(1.0, np.max(np.abs(slopes), axis=-1))
    bad = ~flat & np.any(np.diff(slopes, axis=-1) < -tol[..., None], axis=-1)
    for j, i in zip(*np.nonzero(bad)):
        check_convex_fill(pwl[j][i], fan_coef[j, i])
    return pwl, fan_coef


def assemble_lp(model: BuildingModel, scenario: Scenario, k: int, x, frozen, bounds: MappedBounds,
                pwl, config: LMPCConfig | None = None, spent: float = 0.0,
                fan_coef=None) -> LPProblem:
    config = config or LMPCConfig()
    x = np.asarray(x, dtype=float)
    frozen = np.array(frozen, dtype=float, ndmin=2)
    W, m, n = bounds.W, model.m, model.n
    L = config.segments
    if frozen.shape != (W, m) or len(pwl) != W:
        raise ValueError("frozen outputs, bounds and PWL models cover different windows")
    if k + W > scenario.K:
        raise ValueError(f"window {W} at step {k} runs past the scenario horizon {scenario.K}")
    if fan_coef is None:
        fan_coef = np.array([[linearized_fan_coefficient(i, frozen[j, i], scenario.hvac,
                                                         model.T_s[i], config.eps)[0]
                              for i in range(m)] for j in range(W)])

    t = k + np.arange(W)
    d = scenario.disturbances.predicted[t]
    T_out = d[:, model.ambient_index]
    energy_w = scenario.tau / KWH
    comfort = isinstance(scenario.objective, ComfortMax)
    if comfort:
        ph_cost = config.energy_tiebreak * energy_w * np.ones(W)
    else:
        ph_cost = np.maximum(scenario.prices[t], config.energy_tiebreak) * energy_w

    lp = LPProblem()
    v = lp.add_block("v", (W, m), lb=bounds.v_min, ub=bounds.v_max)
    dv = np.array([[pwl[j][i].dv for i in range(m)] for j in range(W)])
    df = np.array([[pwl[j][i].df for i in range(m)] for j in range(W)])
    h0 = np.array([[pwl[j][i].h0 for i in range(m)] for j in range(W)])
    f0 = h0 ** 3
    sig = lp.add_block("sigma", (W, m, L), lb=0.0, ub=np.where(dv > 0, 1.0, 0.0))
    pf = lp.add_block("P_f", (W, m))
    pc = lp.add_block("P_c", W)
    ph = lp.add_block("P_H", W, lb=0.0, ub=scenario.P_H_max[t], cost=ph_cost)
    xs = lp.add_block("x", (W, n))
    s = lp.add_block("s", (W, m, 2), lb=0.0, cost=config.slack_weight)
    e = lp.add_block("e", (W, m), lb=0.0, cost=1.0) if comfort else None

    A, B, C, E = model.A, model.B, model.C, model.E
    # v = h0 + sum_l dv_l sigma_l ;  P_f = c (f0 + sum_l df_l sigma_l)
    lp.add_rows("pwl_v", (W, m), np.concatenate([v[..., None], sig], axis=-1),
                np.concatenate([np.ones((W, m, 1)), -dv], axis=-1), "==", h0)
    c = fan_coef[..., None]
    lp.add_rows("fan", (W, m), np.concatenate([pf[..., None], sig], axis=-1),
                np.concatenate([np.ones((W, m, 1)), -c * df], axis=-1), "==", fan_coef * f0)
    chil = np.array([linearized_chiller_row(frozen[j], T_out[j], scenario.hvac, model.T_s, config.eps)[0]
                     for j in range(W)])
    lp.add_rows("chiller", (W,), np.concatenate([pc[:, None], v], axis=1),
                np.concatenate([np.ones((W, 1)), -chil], axis=1), "==", 0.0)
    lp.add_rows("total", (W,), np.concatenate([ph[:, None], pc[:, None], pf], axis=1),
                np.concatenate([np.ones((W, 1)), -np.ones((W, 1)), -np.ones((W, m))], axis=1), "==", 0.0)

    # x[j] is the predicted state at absolute time k + j + 1:
    # x[j] - B v[j] - A x[j-1] = E d[j]  (+ A x for j = 0)
    rhs = d @ E.T
    rhs[0] += A @ x
    prev = np.vstack([np.zeros((1, n), dtype=int), xs[:-1]])  # padding for j = 0
    a_coef = np.broadcast_to(-A, (W, n, n)).copy()
    a_coef[0] = 0.0
    idx = np.concatenate([xs[:, :, None], np.broadcast_to(v[:, None, :], (W, n, m)),
                          np.broadcast_to(prev[:, None, :], (W, n, n))], axis=2)
    coef = np.concatenate([np.ones((W, n, 1)), np.broadcast_to(-B, (W, n, m)), a_coef], axis=2)
    lp.add_rows("dyn", (W, n), idx, coef, "==", rhs)

    tn = k + np.arange(1, W + 1)
    live = np.flatnonzero(tn < scenario.K)
    if live.size:
        rows = [np.flatnonzero(C[i]) for i in range(m)]
        width = max(r.size for r in rows)
        y_idx = np.zeros((live.size, m, width), dtype=int)
        y_coef = np.zeros((live.size, m, width))
        for i, r in enumerate(rows):
            y_idx[:, i, :r.size] = xs[live][:, r]
            y_coef[:, i, :r.size] = C[i, r]
        shape = (live.size, m)
        tl = tn[live]
        lp.add_rows("comfort_lo", shape, np.concatenate([y_idx, s[live, :, 0, None]], axis=2),
                    np.concatenate([y_coef, np.ones(shape + (1,))], axis=2), ">=",
                    np.repeat(scenario.T_min[tl], m))
        lp.add_rows("comfort_hi", shape, np.concatenate([y_idx, s[live, :, 1, None]], axis=2),
                    np.concatenate([y_coef, -np.ones(shape + (1,))], axis=2), "<=",
                    np.repeat(scenario.T_max[tl], m))
        if comfort:
            occ = np.flatnonzero(scenario.occupancy[tl] == 1)
            if occ.size:
                T_oc = np.repeat(scenario.objective.T_oc[tl[occ]], m)
                shp = (occ.size, m)
                eidx = e[live[occ], :, None]
                lp.add_rows("dev_hi", shp, np.concatenate([eidx, y_idx[occ]], axis=2),
                            np.concatenate([np.ones(shp + (1,)), -y_coef[occ]], axis=2), ">=", -T_oc)
                lp.add_rows("dev_lo", shp, np.concatenate([eidx, y_idx[occ]], axis=2),
                            np.concatenate([np.ones(shp + (1,)), y_coef[occ]], axis=2), ">=", T_oc)

    if comfort:
        remaining = max(scenario.objective.budget - spent, 0.0)
        lp.add_row("budget", ph, scenario.prices[t] * energy_w, "<=", remaining)

    lp.meta.update(k=k, W=W, m=m, n=n, L=L, y_measured=C @ x)
    return lp


def lp_prediction(lp: LPProblem, res: SolveResult, model: BuildingModel) -> np.ndarray:
    """Predicted outputs ``y[k+j|k]``, ``j = 0..W-1``, from an LP solution."""
    W = lp.meta["W"]
    xp = res.block("x")
    y = np.empty((W, model.m))
    y[0] = lp.meta["y_measured"]
    if W > 1:
        y[1:] = xp[:-1] @ model.C.T
    return y


def pwl_fill_ordered(sigma: np.ndarray, tol: float = 1e-7) -> bool:
    """True when every segment with positive fill follows only full segments."""
    sig = np.asarray(sigma).reshape(-1, np.shape(sigma)[-1])
    for row in sig:
        used = np.flatnonzero(row > tol)
        if used.size and np.any(row[: used[-1]] < 1.0 - tol):
            return False
    return True


@dataclass
class ControlMemory:
    y_pred: np.ndarray | None = None
    spent: float = 0.0
    result: SolveResult | None = None
    bounds: MappedBounds | None = None
    frozen: np.ndarray | None = None
    pwl: list | None = None
    failed: bool = False
    guarded: bool = False


def _prepare(model, scenario, k, x, memory, config):
    y = model.C @ x
    W = scenario.window_at(k) if config.window is None else min(config.window, scenario.K - k)
    if memory is None or memory.y_pred is None:
        frozen = freeze_outputs(True, y, W=W)
        bounds = map_bounds_initial(scenario.u_min, scenario.u_max, y, model.T_s, W, config.eps)
    else:
        frozen = freeze_outputs(False, y, memory.y_pred, W=W)
        frozen[0] = y
        bounds = map_bounds_receding(scenario.u_min, scenario.u_max, frozen, model.T_s,
                                     y_measured=y, eps=config.eps)
    pwl, fan_coef = build_channels(bounds, frozen, scenario, model.T_s, config)
    return y, frozen, bounds, pwl, fan_coef


def control_step(model: BuildingModel, scenario: Scenario, k: int, x_measured,
                 memory: ControlMemory | None = None, config: LMPCConfig | None = None):
    """One receding-horizon step; returns ``(u_applied, memory')``.

    A failed solve holds ``u = 0`` and forgets the previous prediction, so the
    next step restarts from the initial bound mapping.
    """
    config = config or LMPCConfig()
    x = np.asarray(x_measured, dtype=float)
    spent = 0.0 if memory is None else memory.spent
    y, frozen, bounds, pwl, fan_coef = _prepare(model, scenario, k, x, memory, config)
    lp = assemble_lp(model, scenario, k, x, frozen, bounds, pwl, config, spent=spent, fan_coef=fan_coef)
    res = solve_step(lp)
    if res.optimal:
        res.extra["y_pred"] = lp_prediction(lp, res, model)
        u, flags = recover_air_mass_flow(res.v[0], y, model.T_s, config.eps)
        u = np.clip(u, scenario.u_min, scenario.u_max)
        y_pred = res.y_pred
    else:
        u, flags = np.zeros(model.m), np.ones(model.m, dtype=bool)
        y_pred = None
    T_out = scenario.disturbances.predicted[k, model.ambient_index]
    p = total_power(u, y, T_out, scenario.hvac, model.T_s).total
    spent += scenario.prices[k] * p * scenario.tau / KWH
    mem = ControlMemory(y_pred=y_pred, spent=spent, result=res, bounds=bounds, frozen=frozen,
                        pwl=pwl, failed=not res.optimal, guarded=bool(np.any(flags)))
    return u, mem


class LMPCController:
    """Stateful ``(k, x) -> u`` callback for :func:`run_closed_loop`."""

    def __init__(self, model: BuildingModel, scenario: Scenario, config: LMPCConfig | None = None,
                 keep_history: bool = True):
        self.model = model
        self.scenario = scenario
        self.config = config or LMPCConfig()
        self.keep_history = keep_history
        self.memory: ControlMemory | None = None
        self.history: list[ControlMemory] = []

    def __call__(self, k: int, x: np.ndarray) -> np.ndarray:
        if k == 0:
            self.memory = None
            self.history = []
        u, self.memory = control_step(self.model, self.scenario, k, x, self.memory, self.config)
        if self.keep_history:
            self.history.append(self.memory)
        return u

    def summary(self) -> dict:
        slack, ordered, fails, guards = 0, True, 0, 0
        for mem in self.history:
            fails += mem.failed
            guards += mem.guarded
            if mem.result is not None and mem.result.optimal:
                slack += int(np.any(mem.result.block("s") > 1e-6))
                ordered &= pwl_fill_ordered(mem.result.block("sigma"))
        return {"slack_activations": slack, "fill_ordered": bool(ordered),
                "solve_failures": fails, "guard_flags": guards}


def run_lmpc(model: BuildingModel, scenario: Scenario, config: LMPCConfig | None = None,
             record_time: bool = True) -> Trace:
    ctrl = LMPCController(model, scenario, config)
    trace = run_closed_loop(model, ctrl, scenario, record_time=record_time)
    trace.notes.update(ctrl.summary())
    trace.notes["controller"] = ctrl
    return trace


def lp_at_step(model: BuildingModel, scenario: Scenario, k: int,
               config: LMPCConfig | None = None) -> LPProblem:
    """Run the closed loop up to step ``k`` and return the LP solved at ``k``."""
    config = config or LMPCConfig()
    if not 0 <= k < scenario.K:
        raise ValueError(f"step {k} outside 0..{scenario.K - 1}")
    x, memory = scenario.x0.copy(), None
    d = scenario.disturbances.values
    for step in range(k):
        u, memory = control_step(model, scenario, step, x, memory, config)
        x = plant_step(model, x, u, d[step])
    y, frozen, bounds, pwl, fan_coef = _prepare(model, scenario, k, x, memory, config)
    spent = 0.0 if memory is None else memory.spent
    return assemble_lp(model, scenario, k, x, frozen, bounds, pwl, config, spent=spent, fan_coef=fan_coef)
