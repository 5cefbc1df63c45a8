"""Linearization machinery for the LMPC.

* ``v = u * (T_s - y)`` turns the bilinear plant into ``x+ = A x + B v + E d``.
* Box bounds on ``u`` map to output-dependent bounds on ``v``.
* Outputs over the prediction window are frozen at the previous solve's
  prediction, which makes the chiller row linear in ``v`` and leaves the fan
  term as ``coefficient * v**3``.
* ``v**3`` is replaced by an incremental piecewise-linear model.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .power import HvacParams

DEFAULT_EPS = 0.5
DEFAULT_SEGMENTS = 16


class ConvexityError(ValueError):
    """Segment cost slopes are not non-decreasing, so the LP would need binaries."""


def to_linearized_input(u, y, T_s) -> np.ndarray:
    u, y, T_s = (np.asarray(a, dtype=float) for a in (u, y, T_s))
    if not (u.shape == y.shape == T_s.shape):
        raise ValueError(f"dimension mismatch: u{u.shape}, y{y.shape}, T_s{T_s.shape}")
    return u * (T_s - y)


def recover_air_mass_flow(v, y, T_s, eps: float = DEFAULT_EPS):
    """Invert the input transform.

    Returns ``(u, flagged)``; zones with ``|T_s - y| < eps`` get ``u = 0`` and
    a True flag.
    """
    v, y, T_s = (np.asarray(a, dtype=float) for a in (v, y, T_s))
    if not (v.shape == y.shape == T_s.shape):
        raise ValueError("dimension mismatch")
    gap = T_s - y
    flagged = np.abs(gap) < eps
    safe = np.where(flagged, 1.0, gap)
    return np.where(flagged, 0.0, v / safe), flagged


@dataclass(frozen=True, eq=False)
class MappedBounds:
    """Per-offset, per-zone bounds on ``v`` (arrays of shape ``(W, m)``)."""

    v_min: np.ndarray
    v_max: np.ndarray
    guarded: np.ndarray

    @property
    def W(self) -> int:
        return self.v_min.shape[0]


def _corner_bounds(u_min, u_max, y, T_s, eps):
    # v is affine in u over a box, so its extremes sit at the corners.
    gap = T_s - y
    lo = np.minimum(u_min * gap, u_max * gap)
    hi = np.maximum(u_min * gap, u_max * gap)
    guarded = np.abs(gap) < eps
    lo = np.where(guarded, 0.0, lo)
    hi = np.where(guarded, 0.0, hi)
    return lo, hi, guarded


def map_bounds_initial(u_min, u_max, y0, T_s, W: int, eps: float = DEFAULT_EPS) -> MappedBounds:
    """Bounds at the current output, copied to every offset of the window."""
    u_min, u_max, y0, T_s = (np.asarray(a, dtype=float) for a in (u_min, u_max, y0, T_s))
    lo, hi, g = _corner_bounds(u_min, u_max, y0, T_s, eps)
    return MappedBounds(np.tile(lo, (W, 1)), np.tile(hi, (W, 1)), np.tile(g, (W, 1)))


def map_bounds_receding(u_min, u_max, frozen, T_s, y_measured=None,
                        eps: float = DEFAULT_EPS) -> MappedBounds:
    """Bounds from the sign rule evaluated at each offset's frozen output.

    Offset 0 uses ``y_measured`` when given.
    """
    frozen = np.array(frozen, dtype=float, ndmin=2)
    if y_measured is not None:
        frozen[0] = y_measured
    u_min, u_max, T_s = (np.asarray(a, dtype=float) for a in (u_min, u_max, T_s))
    lo, hi, g = _corner_bounds(u_min[None, :], u_max[None, :], frozen, T_s[None, :], eps)
    return MappedBounds(lo, hi, g)


def freeze_outputs(first_solve: bool, y0, prev_prediction=None, W: int | None = None) -> np.ndarray:
    """Outputs held constant over the window of the current solve.

    The previous prediction (rows ``y[k-1+j | k-1]``) is shifted one step to
    absolute-time alignment; the unknown final row repeats the last one.
    """
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    if first_solve:
        if W is None:
            raise ValueError("W is required on the first solve")
        return np.tile(y0, (W, 1))
    if prev_prediction is None:
        raise ValueError("prev_prediction is required after the first solve")
    prev = np.array(prev_prediction, dtype=float, ndmin=2)
    W = prev.shape[0] if W is None else W
    shifted = np.vstack([prev[1:], prev[-1:]])
    if W > shifted.shape[0]:
        shifted = np.vstack([shifted, np.repeat(shifted[-1:], W - shifted.shape[0], axis=0)])
    return shifted[:W]


@dataclass(frozen=True, eq=False)
class PWLApprox:
    """Incremental piecewise-linear model of ``v**3`` on ``[h_0, h_L]``."""

    breakpoints: np.ndarray

    @cached_property
    def max_error(self) -> float:
        """Largest ``|model - v**3|`` over the domain."""
        return float(np.max(_segment_max_error(self.breakpoints[:-1], self.breakpoints[1:]), initial=0.0))

    @property
    def segments(self) -> int:
        return self.breakpoints.size - 1

    @property
    def h0(self) -> float:
        return float(self.breakpoints[0])

    @property
    def f0(self) -> float:
        return float(self.breakpoints[0] ** 3)

    @property
    def dv(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    @property
    def df(self) -> np.ndarray:
        return np.diff(self.breakpoints ** 3)

    @property
    def cumulative(self) -> np.ndarray:
        """Model value at every breakpoint."""
        return self.f0 + np.concatenate([[0.0], np.cumsum(self.df)])

    def fill(self, v) -> np.ndarray:
        """Segment fractions that reach ``v`` when segments are filled in order."""
        dv = self.dv
        safe = np.where(dv > 0, dv, 1.0)
        return np.where(dv > 0, np.clip((v - self.breakpoints[:-1]) / safe, 0.0, 1.0), 0.0)

    def __call__(self, v):
        return np.interp(v, self.breakpoints, self.cumulative)


def _segment_max_error(a, b) -> np.ndarray:
    # Secant minus cube on [a, b] vanishes at the ends; interior extremes sit
    # where 3 v^2 equals the secant slope.
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    slope = a * a + a * b + b * b
    r = np.sqrt(slope / 3.0)
    err = np.zeros(np.broadcast(a, b).shape)
    for c in (r, -r):
        inside = (a < c) & (c < b)
        err = np.maximum(err, np.where(inside, np.abs(a ** 3 + slope * (c - a) - c ** 3), 0.0))
    return err


def build_pwl(v_min: float, v_max: float, segments: int = DEFAULT_SEGMENTS) -> PWLApprox:
    if not v_max > v_min:
        raise ValueError(f"empty PWL domain [{v_min}, {v_max}]")
    if segments < 1:
        raise ValueError("segments must be >= 1")
    h = np.linspace(v_min, v_max, segments + 1)
    h[0], h[-1] = v_min, v_max
    return PWLApprox(breakpoints=h)


def degenerate_pwl(value: float, segments: int = DEFAULT_SEGMENTS) -> PWLApprox:
    """Zero-width model for a pinned input; keeps the LP layout unchanged."""
    return PWLApprox(breakpoints=np.full(segments + 1, float(value)))


def check_convex_fill(pwl: PWLApprox, coefficient: float) -> None:
    """Require non-decreasing segment slopes of ``coefficient * v**3``."""
    dv = pwl.dv
    live = dv > 0
    if live.sum() < 2:
        return
    slopes = coefficient * pwl.df[live] / dv[live]
    tol = 1e-9 * max(1.0, float(np.max(np.abs(slopes))))
    if np.any(np.diff(slopes) < -tol):
        raise ConvexityError(
            f"segment slopes of {coefficient:.4g}*v^3 on [{pwl.breakpoints[0]:.4g}, "
            f"{pwl.breakpoints[-1]:.4g}] decrease; split the domain at v = 0"
        )


def linearized_fan_coefficient(zone: int, frozen_y: float, params: HvacParams, T_s_i: float,
                               eps: float = DEFAULT_EPS):
    """``P_rated / ((T_s - y) * u_rated)**3``; returns ``(coefficient, guarded)``."""
    gap = T_s_i - frozen_y
    if abs(gap) < eps:
        return 0.0, True
    return float(params.P_rated[zone] / (gap * params.u_rated[zone]) ** 3), False


def linearized_chiller_row(frozen_y, T_out: float, params: HvacParams, T_s,
                           eps: float = DEFAULT_EPS):
    """Coefficients on ``v`` of the chiller power with outputs frozen.

    Returns ``(coefficients, guarded)``.
    """
    y, T_s = np.asarray(frozen_y, dtype=float), np.asarray(T_s, dtype=float)
    gap = T_s - y
    guarded = np.abs(gap) < eps
    mix = params.d_p * y + (1.0 - params.d_p) * T_out - T_s
    coef = params.c_a / params.COP * mix / np.where(guarded, 1.0, gap)
    return np.where(guarded, 0.0, coef), guarded
