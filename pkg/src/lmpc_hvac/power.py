"""Nonlinear HVAC power model: cubic fan law, bilinear chiller load, total."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .thermal import DEFAULT_AIR_HEAT_CAPACITY


@dataclass(frozen=True, eq=False)
class HvacParams:
    P_rated: np.ndarray
    u_rated: np.ndarray
    COP: float = 3.0
    d_p: float = 0.0
    c_a: float = DEFAULT_AIR_HEAT_CAPACITY

    def __post_init__(self):
        for name in ("P_rated", "u_rated"):
            arr = np.atleast_1d(np.array(getattr(self, name), dtype=float))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.P_rated.shape != self.u_rated.shape:
            raise ValueError("P_rated and u_rated must have one entry per zone")
        if np.any(self.P_rated <= 0) or np.any(self.u_rated <= 0):
            raise ValueError("P_rated and u_rated must be positive")
        if not self.COP > 0:
            raise ValueError("COP must be positive")
        if not 0.0 <= self.d_p <= 1.0:
            raise ValueError("d_p must lie in [0, 1]")
        if not self.c_a > 0:
            raise ValueError("c_a must be positive")

    @property
    def m(self) -> int:
        return self.P_rated.shape[0]

    def to_dict(self) -> dict:
        return {
            "P_rated": self.P_rated.tolist(), "u_rated": self.u_rated.tolist(),
            "COP": self.COP, "d_p": self.d_p, "c_a": self.c_a,
        }


@dataclass(frozen=True)
class PowerBreakdown:
    fan: np.ndarray
    chiller: float
    total: float


def fan_power(u_i: float, params: HvacParams, zone: int = 0) -> float:
    """Fan power of one zone, ``P_rated * (u / u_rated)**3`` in W."""
    if u_i < 0:
        raise ValueError(f"air mass flow must be non-negative, got {u_i}")
    return float(params.P_rated[zone] * (u_i / params.u_rated[zone]) ** 3)


def fan_powers(u, params: HvacParams) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != params.m:
        raise ValueError("u has wrong number of zones")
    if np.any(u < 0):
        raise ValueError("air mass flow must be non-negative")
    return params.P_rated * (u / params.u_rated) ** 3


def chiller_power(u, y, T_out: float, params: HvacParams, T_s) -> float:
    """Chiller electric power for the mixed return/outdoor air stream."""
    u, y, T_s = (np.asarray(a, dtype=float) for a in (u, y, T_s))
    if not (u.shape == y.shape == T_s.shape):
        raise ValueError(f"dimension mismatch: u{u.shape}, y{y.shape}, T_s{T_s.shape}")
    if np.any(u < 0):
        raise ValueError("air mass flow must be non-negative")
    mix = params.d_p * y + (1.0 - params.d_p) * T_out - T_s
    return float(params.c_a / params.COP * np.sum(u * mix))


def total_power(u, y, T_out: float, params: HvacParams, T_s) -> PowerBreakdown:
    fan = fan_powers(u, params)
    chiller = chiller_power(u, y, T_out, params, T_s)
    return PowerBreakdown(fan=fan, chiller=chiller, total=chiller + float(np.sum(fan)))
