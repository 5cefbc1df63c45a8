"""Exact bilinear plant and the closed-loop harness that records a Trace."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .power import total_power
from .scenario import Scenario
from .thermal import BuildingModel

KWH = 3.6e6  # J per kWh


def _check_dims(model: BuildingModel, x=None, u=None, d=None):
    if x is not None and x.shape != (model.n,):
        raise ValueError(f"state has shape {x.shape}, expected ({model.n},)")
    if u is not None and u.shape != (model.m,):
        raise ValueError(f"input has shape {u.shape}, expected ({model.m},)")
    if d is not None and d.shape != (model.l,):
        raise ValueError(f"disturbance has shape {d.shape}, expected ({model.l},)")


def measure(model: BuildingModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    _check_dims(model, x=x)
    return model.C @ x


def plant_step(model: BuildingModel, x, u, d) -> np.ndarray:
    """Advance the bilinear plant by one sampling interval."""
    x, u, d = (np.asarray(a, dtype=float) for a in (x, u, d))
    _check_dims(model, x, u, d)
    if np.any(u < 0):
        raise ValueError("air mass flow must be non-negative")
    y = model.C @ x
    return model.A @ x + model.B @ (u * (model.T_s - y)) + model.E @ d


def step_energy_cost(price: float, P_H: float, tau: float) -> float:
    """Cost of running at ``P_H`` watts for ``tau`` seconds at ``price`` per kWh."""
    return price * P_H * tau / KWH


@dataclass(eq=False)
class Trace:
    """Closed-loop time series; row ``k`` holds the state at the start of step ``k``."""

    tau: float
    x: np.ndarray
    y: np.ndarray
    u: np.ndarray
    v: np.ndarray
    P_fan_total: np.ndarray
    P_chiller: np.ndarray
    P_H: np.ndarray
    price: np.ndarray
    step_cost: np.ndarray
    cum_cost: np.ndarray
    solver_time: np.ndarray
    clamped: np.ndarray
    x_final: np.ndarray | None = None
    notes: dict = field(default_factory=dict)

    @property
    def K(self) -> int:
        return self.x.shape[0]

    @property
    def total_cost(self) -> float:
        return float(self.cum_cost[-1]) if self.K else 0.0

    @property
    def total_solver_time(self) -> float:
        return float(np.sum(self.solver_time))

    def check(self, model: BuildingModel | None = None, atol: float = 1e-9) -> None:
        """Raise AssertionError if the trace invariants do not hold."""
        K = self.K
        for name in ("y", "u", "v", "P_fan_total", "P_chiller", "P_H", "price",
                     "step_cost", "cum_cost", "solver_time", "clamped"):
            assert getattr(self, name).shape[0] == K, f"{name} length differs"
        assert np.allclose(self.cum_cost, np.cumsum(self.step_cost), rtol=0, atol=atol)
        if model is not None:
            assert np.allclose(self.y, self.x @ model.C.T, rtol=0, atol=atol)

    @classmethod
    def empty(cls, tau: float, n: int, m: int) -> "Trace":
        z1 = np.zeros(0)
        return cls(
            tau=tau, x=np.zeros((0, n)), y=np.zeros((0, m)), u=np.zeros((0, m)),
            v=np.zeros((0, m)), P_fan_total=z1, P_chiller=z1.copy(), P_H=z1.copy(),
            price=z1.copy(), step_cost=z1.copy(), cum_cost=z1.copy(),
            solver_time=z1.copy(), clamped=np.zeros(0, dtype=bool),
        )


Controller = Callable[[int, np.ndarray], np.ndarray]


def run_closed_loop(model: BuildingModel, controller: Controller, scenario: Scenario,
                    record_time: bool = True) -> Trace:
    """Drive the exact plant with ``controller(k, x) -> u`` for the whole scenario.

    Controller outputs outside ``[u_min, u_max]`` (or non-finite) are clamped
    and flagged instead of aborting the run.
    """
    scenario.check_model(model)
    K, n, m = scenario.K, model.n, model.m
    d_true = scenario.disturbances.values
    T_out = scenario.disturbances.column("T_amb")
    xs = np.zeros((K, n))
    us = np.zeros((K, m))
    fan = np.zeros(K)
    chil = np.zeros(K)
    ph = np.zeros(K)
    cost = np.zeros(K)
    times = np.zeros(K)
    clamped = np.zeros(K, dtype=bool)

    x = scenario.x0.copy()
    for k in range(K):
        xs[k] = x
        t0 = time.perf_counter()
        u = np.asarray(controller(k, x.copy()), dtype=float).reshape(m)
        times[k] = time.perf_counter() - t0 if record_time else 0.0
        bad = ~np.isfinite(u)
        u_c = np.clip(np.where(bad, 0.0, u), scenario.u_min, scenario.u_max)
        clamped[k] = bool(bad.any() or np.any(u_c != u))
        us[k] = u_c
        y = model.C @ x
        pb = total_power(u_c, y, T_out[k], scenario.hvac, model.T_s)
        fan[k], chil[k], ph[k] = pb.fan.sum(), pb.chiller, pb.total
        cost[k] = step_energy_cost(scenario.prices[k], pb.total, scenario.tau)
        x = plant_step(model, x, u_c, d_true[k])

    ys = xs @ model.C.T
    return Trace(
        tau=scenario.tau, x=xs, y=ys, u=us, v=us * (model.T_s - ys),
        P_fan_total=fan, P_chiller=chil, P_H=ph, price=scenario.prices.copy(),
        step_cost=cost, cum_cost=np.cumsum(cost), solver_time=times,
        clamped=clamped, x_final=x,
    )


def zero_controller(m: int) -> Controller:
    return lambda k, x: np.zeros(m)


def constant_controller(u) -> Controller:
    u = np.asarray(u, dtype=float)
    return lambda k, x: u.copy()
