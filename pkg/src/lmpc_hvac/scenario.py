"""Scenario description: forecasts, tariffs, comfort bands, limits, objective.

Scenarios are stored as JSON.  Prices are in currency per kWh; every
per-step array has one entry per sampling interval of ``tau`` seconds.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import jsonschema
import numpy as np

from .power import HvacParams
from .thermal import BuildingModel

UNOCCUPIED_BAND = (0.0, 45.0)


class ScenarioError(ValueError):
    """Raised for malformed or inconsistent scenario documents."""


@dataclass(frozen=True)
class CostMin:
    kind = "cost_min"


@dataclass(frozen=True, eq=False)
class ComfortMax:
    T_oc: np.ndarray
    budget: float

    kind = "comfort_max"

    def __post_init__(self):
        object.__setattr__(self, "T_oc", np.asarray(self.T_oc, dtype=float))


@dataclass(frozen=True, eq=False)
class DisturbanceSeries:
    labels: tuple[str, ...]
    values: np.ndarray
    forecast: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        vals = np.atleast_2d(np.asarray(self.values, dtype=float))
        object.__setattr__(self, "values", vals)
        if self.forecast is not None:
            object.__setattr__(self, "forecast", np.atleast_2d(np.asarray(self.forecast, dtype=float)))
        if vals.shape[0] < 1 or vals.shape[1] != len(self.labels):
            raise ScenarioError("disturbance values must be K x len(labels) with K >= 1")
        if self.forecast is not None and self.forecast.shape != vals.shape:
            raise ScenarioError("disturbance forecast must match the true series shape")

    @property
    def predicted(self) -> np.ndarray:
        return self.values if self.forecast is None else self.forecast

    def column(self, label: str, predicted: bool = False) -> np.ndarray:
        src = self.predicted if predicted else self.values
        return src[:, self.labels.index(label)]


@dataclass(frozen=True, eq=False)
class Scenario:
    tau: float
    window: int
    prices: np.ndarray
    disturbances: DisturbanceSeries
    occupancy: np.ndarray
    T_min: np.ndarray
    T_max: np.ndarray
    u_min: np.ndarray
    u_max: np.ndarray
    P_H_max: np.ndarray
    hvac: HvacParams
    x0: np.ndarray
    objective: CostMin | ComfortMax = field(default_factory=CostMin)
    start: str = "2020-07-01T00:00:00"
    name: str = ""

    def __post_init__(self):
        for name in ("prices", "T_min", "T_max", "u_min", "u_max", "P_H_max", "x0"):
            object.__setattr__(self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=float)))
        object.__setattr__(self, "occupancy", np.asarray(self.occupancy, dtype=int))
        self.check()

    @property
    def K(self) -> int:
        return self.prices.shape[0]

    @property
    def m(self) -> int:
        return self.u_min.shape[0]

    def window_at(self, k: int) -> int:
        return min(self.window, self.K - k)

    def check(self) -> None:
        K = self.K
        if not self.tau > 0:
            raise ScenarioError("tau: must be positive")
        if self.window < 1:
            raise ScenarioError("window: must be >= 1")
        for name in ("occupancy", "T_min", "T_max", "P_H_max"):
            if getattr(self, name).shape != (K,):
                raise ScenarioError(f"{name}: expected {K} entries")
        if self.disturbances.values.shape[0] != K:
            raise ScenarioError(f"disturbances: expected {K} rows")
        if not set(np.unique(self.occupancy)) <= {0, 1}:
            raise ScenarioError("occupancy: entries must be 0 or 1")
        bad = np.flatnonzero(self.T_min > self.T_max)
        if bad.size:
            k = int(bad[0])
            raise ScenarioError(f"T_min[{k}] = {self.T_min[k]} exceeds T_max[{k}] = {self.T_max[k]}")
        if np.any(self.prices < 0):
            raise ScenarioError(f"prices[{int(np.flatnonzero(self.prices < 0)[0])}]: must be >= 0")
        if np.any(self.P_H_max < 0):
            raise ScenarioError("P_H_max: must be >= 0")
        if self.u_max.shape != self.u_min.shape:
            raise ScenarioError("u_max: must match u_min")
        if np.any(self.u_min < 0):
            raise ScenarioError("u_min: must be >= 0")
        if np.any(self.u_min > self.u_max):
            raise ScenarioError("u_min: exceeds u_max")
        if self.hvac.m != self.m:
            raise ScenarioError("hvac: one P_rated/u_rated entry per zone required")
        if isinstance(self.objective, ComfortMax):
            if self.objective.T_oc.shape != (K,):
                raise ScenarioError(f"objective.T_oc: expected {K} entries")
            if self.objective.budget < 0:
                raise ScenarioError("objective.budget: must be >= 0")

    def check_model(self, model: BuildingModel) -> None:
        if tuple(self.disturbances.labels) != tuple(model.disturbance_labels):
            raise ScenarioError("disturbances.labels: do not match the model's disturbance layout")
        if self.x0.shape != (model.n,):
            raise ScenarioError(f"x0: expected {model.n} entries")
        if self.m != model.m:
            raise ScenarioError(f"u_min: expected {model.m} zones")
        if not np.isclose(self.tau, model.tau):
            raise ScenarioError(f"tau: scenario {self.tau} s vs model {model.tau} s")

    def with_objective(self, objective) -> "Scenario":
        return replace(self, objective=objective)


# JSON ----------------------------------------------------------------------

_num = {"type": "number"}
_numarr = {"type": "array", "items": _num}

SCENARIO_SCHEMA = {
    "type": "object",
    "required": [
        "tau", "window", "prices", "disturbances", "occupancy", "T_min", "T_max",
        "u_min", "u_max", "P_H_max", "hvac", "objective", "x0",
    ],
    "properties": {
        "name": {"type": "string"},
        "start": {"type": "string", "format": "date-time"},
        "tau": _num,
        "window": {"type": "integer", "minimum": 1},
        "prices": _numarr,
        "occupancy": {"type": "array", "items": {"enum": [0, 1]}},
        "T_min": _numarr,
        "T_max": _numarr,
        "u_min": _numarr,
        "u_max": _numarr,
        "P_H_max": _numarr,
        "x0": _numarr,
        "disturbances": {
            "type": "object",
            "required": ["labels", "values"],
            "properties": {
                "labels": {"type": "array", "items": {"type": "string"}},
                "values": {"type": "array", "items": _numarr},
                "forecast": {"type": "array", "items": _numarr},
            },
        },
        "hvac": {
            "type": "object",
            "required": ["P_rated", "u_rated", "COP", "d_p"],
            "properties": {
                "P_rated": _numarr, "u_rated": _numarr, "COP": _num,
                "d_p": {"type": "number", "minimum": 0, "maximum": 1}, "c_a": _num,
            },
        },
        "objective": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["cost_min", "comfort_max"]},
                "T_oc": _numarr,
                "budget": {"type": "number", "minimum": 0},
            },
            "if": {"properties": {"kind": {"const": "comfort_max"}}},
            "then": {"required": ["T_oc", "budget"]},
        },
    },
}


def scenario_to_dict(sc: Scenario) -> dict:
    obj = {"kind": sc.objective.kind}
    if isinstance(sc.objective, ComfortMax):
        obj.update(T_oc=sc.objective.T_oc.tolist(), budget=sc.objective.budget)
    dist = {"labels": list(sc.disturbances.labels), "values": sc.disturbances.values.tolist()}
    if sc.disturbances.forecast is not None:
        dist["forecast"] = sc.disturbances.forecast.tolist()
    return {
        "name": sc.name,
        "start": sc.start,
        "tau": sc.tau,
        "window": sc.window,
        "prices": sc.prices.tolist(),
        "occupancy": sc.occupancy.tolist(),
        "T_min": sc.T_min.tolist(),
        "T_max": sc.T_max.tolist(),
        "u_min": sc.u_min.tolist(),
        "u_max": sc.u_max.tolist(),
        "P_H_max": sc.P_H_max.tolist(),
        "x0": sc.x0.tolist(),
        "hvac": sc.hvac.to_dict(),
        "objective": obj,
        "disturbances": dist,
    }


def scenario_from_dict(data: dict) -> Scenario:
    try:
        jsonschema.validate(data, SCENARIO_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = ".".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ScenarioError(f"{path}: {exc.message}") from None
    hv = data["hvac"]
    hvac_kw = {k: hv[k] for k in ("P_rated", "u_rated", "COP", "d_p")}
    if "c_a" in hv:
        hvac_kw["c_a"] = hv["c_a"]
    try:
        hvac = HvacParams(**hvac_kw)
    except ValueError as exc:
        raise ScenarioError(f"hvac: {exc}") from None
    ob = data["objective"]
    objective = CostMin() if ob["kind"] == "cost_min" else ComfortMax(T_oc=ob["T_oc"], budget=ob["budget"])
    dist = data["disturbances"]
    return Scenario(
        tau=float(data["tau"]),
        window=int(data["window"]),
        prices=data["prices"],
        disturbances=DisturbanceSeries(
            labels=tuple(dist["labels"]), values=dist["values"], forecast=dist.get("forecast"),
        ),
        occupancy=data["occupancy"],
        T_min=data["T_min"],
        T_max=data["T_max"],
        u_min=data["u_min"],
        u_max=data["u_max"],
        P_H_max=data["P_H_max"],
        hvac=hvac,
        x0=data["x0"],
        objective=objective,
        start=data.get("start", "2020-07-01T00:00:00"),
        name=data.get("name", ""),
    )


def dumps_scenario(sc: Scenario) -> str:
    return json.dumps(scenario_to_dict(sc), indent=1) + "\n"


def save_scenario(sc: Scenario, path) -> None:
    Path(path).write_text(dumps_scenario(sc))


def load_scenario(path) -> Scenario:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return scenario_from_dict(data)
