"""Trace persistence (CSV) and plot emission (SVG).

CSV columns, one row per step::

    k, t_seconds, x_0..x_{n-1}, y_0..y_{m-1}, u_0.., v_0..,
    P_fan_total, P_chiller, P_H, price, step_cost, cum_cost, solver_time, clamped_flag

Floats are written with 17 significant digits so a re-read reproduces the
in-memory trace bit for bit.
"""
from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .plant import Trace
from .scenario import Scenario

TAIL = ["P_fan_total", "P_chiller", "P_H", "price", "step_cost", "cum_cost", "solver_time", "clamped_flag"]


def trace_header(n: int, m: int) -> list[str]:
    return (["k", "t_seconds"] + [f"x_{i}" for i in range(n)] + [f"y_{i}" for i in range(m)]
            + [f"u_{i}" for i in range(m)] + [f"v_{i}" for i in range(m)] + TAIL)


def _fmt(v: float) -> str:
    return "%.17g" % v


def trace_to_csv(trace: Trace, solver_time: bool = True) -> str:
    """CSV text; ``solver_time=False`` writes zeros so runs compare byte for byte."""
    n, m = trace.x.shape[1], trace.y.shape[1]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(trace_header(n, m))
    times = trace.solver_time if solver_time else np.zeros(trace.K)
    for k in range(trace.K):
        row = [str(k), _fmt(k * trace.tau)]
        row += [_fmt(a) for a in trace.x[k]]
        row += [_fmt(a) for a in trace.y[k]]
        row += [_fmt(a) for a in trace.u[k]]
        row += [_fmt(a) for a in trace.v[k]]
        row += [_fmt(a) for a in (trace.P_fan_total[k], trace.P_chiller[k], trace.P_H[k], trace.price[k],
                                  trace.step_cost[k], trace.cum_cost[k], times[k])]
        row.append(str(int(trace.clamped[k])))
        w.writerow(row)
    return buf.getvalue()


def write_trace(trace: Trace, path, solver_time: bool = True) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(trace_to_csv(trace, solver_time=solver_time))


def _count(header: list[str], prefix: str) -> int:
    return sum(1 for h in header if h.startswith(prefix) and h[len(prefix):].isdigit())


def read_trace(path, tau: float | None = None) -> Trace:
    """Parse a trace CSV.  ``tau`` is needed only for header-only files."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file, expected a header")
    header = rows[0]
    n, m = _count(header, "x_"), _count(header, "y_")
    if header != trace_header(n, m):
        raise ValueError(f"{path}: unexpected columns")
    data = np.array([[float(c) for c in r] for r in rows[1:]]).reshape(-1, len(header))
    K = data.shape[0]
    if K >= 2:
        tau = float(data[1, 1] - data[0, 1])
    elif tau is None:
        tau = 0.0
    col = {h: i for i, h in enumerate(header)}

    def block(prefix, count):
        return data[:, [col[f"{prefix}{i}"] for i in range(count)]]

    return Trace(
        tau=tau, x=block("x_", n), y=block("y_", m), u=block("u_", m), v=block("v_", m),
        P_fan_total=data[:, col["P_fan_total"]], P_chiller=data[:, col["P_chiller"]],
        P_H=data[:, col["P_H"]], price=data[:, col["price"]], step_cost=data[:, col["step_cost"]],
        cum_cost=data[:, col["cum_cost"]], solver_time=data[:, col["solver_time"]],
        clamped=data[:, col["clamped_flag"]].astype(bool),
    )


# Plots ---------------------------------------------------------------------

PLOT_FILES = ("temperature.svg", "airflow.svg", "power.svg")


def emit_plots(trace: Trace, directory, scenario: Scenario | None = None) -> list[Path]:
    """Write room temperature (with comfort band), air mass flow and HVAC power plots.

    The SVGs carry no timestamp and a fixed id salt, so identical traces give
    identical files.
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    hours = np.arange(trace.K) * trace.tau / 3600.0
    out = []
    with matplotlib.rc_context({"svg.hashsalt": "lmpc-hvac", "svg.fonttype": "path"}):
        fig, ax = plt.subplots(figsize=(7, 3))
        if scenario is not None and scenario.K == trace.K:
            occ = scenario.occupancy == 1
            lo = np.where(occ, scenario.T_min, np.nan)
            hi = np.where(occ, scenario.T_max, np.nan)
            ax.fill_between(hours, lo, hi, step="post", color="0.85", label="comfort band")
        for i in range(trace.y.shape[1]):
            ax.step(hours, trace.y[:, i], where="post", label=f"zone {i}")
        ax.set_xlabel("hour")
        ax.set_ylabel("room temperature [degC]")
        ax.legend(loc="best", fontsize="small")
        out.append(_save(fig, directory / PLOT_FILES[0]))

        fig, ax = plt.subplots(figsize=(7, 3))
        for i in range(trace.u.shape[1]):
            ax.step(hours, trace.u[:, i], where="post", label=f"zone {i}")
        ax.set_xlabel("hour")
        ax.set_ylabel("air mass flow [kg/s]")
        ax.legend(loc="best", fontsize="small")
        out.append(_save(fig, directory / PLOT_FILES[1]))

        fig, ax = plt.subplots(figsize=(7, 3))
        ax.step(hours, trace.P_H / 1000.0, where="post", label="total")
        ax.step(hours, trace.P_chiller / 1000.0, where="post", label="chiller", alpha=0.7)
        ax.set_xlabel("hour")
        ax.set_ylabel("HVAC power [kW]")
        ax.legend(loc="best", fontsize="small")
        out.append(_save(fig, directory / PLOT_FILES[2]))
    return out


def _save(fig, path: Path) -> Path:
    import matplotlib.pyplot as plt

    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
