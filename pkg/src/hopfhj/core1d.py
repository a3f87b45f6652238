"""Exact 1D value function and optimal trajectory.

The running cost is ``xdot^2 / 2 - U(x)`` with the two-slope concave
potential ``U(x) = -a x`` for ``x >= 0`` and ``U(x) = b x`` for ``x < 0``,
and the initial cost is linear, ``Phi(x) = p x``.  The value function
``V(x, t; p, a, b)`` is piecewise over five regions of ``(x, t, p)``; for
``p < 0`` everything is obtained by the reflection ``(x, p, a, b) ->
(-x, -p, b, a)``.

``value`` and ``value_dp`` are the hot kernels and are dispatched to the
selected backend (see ``hopfhj._backend``).  Everything else here is plain
Python.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels


@dataclass(frozen=True)
class PotentialParams1D:
    """Slopes of the 1D potential: ``U(x) = -a x`` (x >= 0), ``b x`` (x < 0)."""

    a: float
    b: float

    def __post_init__(self):
        for name in ("a", "b"):
            v = float(getattr(self, name))
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a positive finite number, got {v!r}")
            object.__setattr__(self, name, v)

    def swapped(self) -> "PotentialParams1D":
        return PotentialParams1D(self.b, self.a)

    def potential(self, x):
        """U(x); accepts scalars or arrays."""
        x = np.asarray(x, dtype=float)
        out = np.where(x >= 0, -self.a * x, self.b * x)
        return float(out) if out.ndim == 0 else out


class Region(enum.Enum):
    OMEGA1 = 1
    OMEGA2 = 2
    OMEGA3 = 3
    OMEGA4 = 4
    OMEGA5 = 5


def _check_finite(**kw):
    for k, v in kw.items():
        if not math.isfinite(v):
            raise ValueError(f"{k} must be finite, got {v!r}")


def _check_xtp(x, t, p):
    _check_finite(x=x, t=t, p=p)
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t!r}")


def classify_region(x: float, t: float, p: float, params: PotentialParams1D) -> Region:
    """Region containing ``(x, t, p)`` for ``p >= 0``.

    Uses the half-open inequalities of the region definitions verbatim, so
    every admissible point belongs to exactly one region.  Negative ``p``
    is rejected; reflect first.
    """
    _check_xtp(x, t, p)
    if p < 0:
        raise ValueError("classify_region requires p >= 0; apply the reflection first")
    a, b = params.a, params.b
    upper = p * t + 0.5 * a * t * t
    if x >= upper:
        return Region.OMEGA1
    s = t - p / b
    if s < 0:
        # t < p / b
        return Region.OMEGA2 if x < 0 else Region.OMEGA3
    if x < -0.5 * b * s * s:
        return Region.OMEGA2
    if x < 0:
        return Region.OMEGA5
    if x < 0.5 * a * s * s:
        return Region.OMEGA4
    return Region.OMEGA3


def value(x: float, t: float, p: float, params: PotentialParams1D) -> float:
    """V(x, t; p, a, b).  ``t == 0`` returns ``p * x``."""
    _check_xtp(x, t, p)
    return kernels.value(float(x), float(t), float(p), params.a, params.b)


def value_dp(x: float, t: float, p: float, params: PotentialParams1D) -> float:
    """dV/dp.  Equals the initial point ``gamma(0)`` of the optimal trajectory."""
    _check_xtp(x, t, p)
    return kernels.value_dp(float(x), float(t), float(p), params.a, params.b)


def _f3_terms(x, t, p, a, b):
    k = a + 2.0 * b
    d = b * t - p
    sq = math.sqrt(max(d * d + 2.0 * x * k, 0.0))
    return k, d, sq


def _dx_pos(x, t, p, a, b):
    region = classify_region(x, t, p, PotentialParams1D(a, b))
    if region is Region.OMEGA1:
        return a * t + p
    if region is Region.OMEGA2:
        return p - b * t
    if region is Region.OMEGA3:
        k, d, sq = _f3_terms(x, t, p, a, b)
        return (a + b) / k * sq - b * d / k
    if region is Region.OMEGA4:
        return math.sqrt(2.0 * a * x)
    return -math.sqrt(-2.0 * b * x)


def _dt_pos(x, t, p, a, b):
    region = classify_region(x, t, p, PotentialParams1D(a, b))
    if region is Region.OMEGA1:
        return -0.5 * a * a * t * t - a * p * t + a * x - 0.5 * p * p
    if region is Region.OMEGA2:
        return -0.5 * b * b * t * t + b * p * t - b * x - 0.5 * p * p
    if region is Region.OMEGA3:
        k, d, sq = _f3_terms(x, t, p, a, b)
        # d^2 + d sqrt(D), written to avoid cancellation when d < 0
        g = d * (2.0 * x * k) / (sq - d) if d < 0 else d * (d + sq)
        return (b * (a + b) / (k * k) * g - b * b * x / k
                - 0.5 * b * b * t * t + b * p * t - 0.5 * p * p)
    return 0.0


def value_dx(x: float, t: float, p: float, params: PotentialParams1D) -> float:
    """dV/dx for ``t > 0``."""
    _check_xtp(x, t, p)
    if t <= 0:
        raise ValueError("value_dx requires t > 0")
    if p < 0:
        return -_dx_pos(-x, t, -p, params.b, params.a)
    return _dx_pos(x, t, p, params.a, params.b)


def value_dt(x: float, t: float, p: float, params: PotentialParams1D) -> float:
    """dV/dt for ``t > 0``."""
    _check_xtp(x, t, p)
    if t <= 0:
        raise ValueError("value_dt requires t > 0")
    if p < 0:
        return _dt_pos(-x, t, -p, params.b, params.a)
    return _dt_pos(x, t, p, params.a, params.b)


def hj_residual(x: float, t: float, p: float, params: PotentialParams1D) -> float:
    """``V_t + V_x^2 / 2 + U(x)`` from the analytic derivatives."""
    dx = value_dx(x, t, p, params)
    return value_dt(x, t, p, params) + 0.5 * dx * dx + params.potential(x)


def switch_time(x: float, t: float, p: float, params: PotentialParams1D) -> float:
    """Crossing time ``tau`` of the Omega_3 trajectory (``p >= 0``, ``x >= 0``)."""
    a, b = params.a, params.b
    k, d, sq = _f3_terms(x, t, p, a, b)
    return ((a + b) * t + p - sq) / k


@dataclass(frozen=True)
class _Path:
    region: Region
    sign: float
    x: float
    t: float
    p: float
    a: float
    b: float
    breaks: tuple


def _path(x, t, p, params) -> _Path:
    _check_xtp(x, t, p)
    if t <= 0:
        raise ValueError("trajectories are defined for t > 0 only")
    sign = 1.0
    a, b = params.a, params.b
    if p < 0:
        x, p, a, b, sign = -x, -p, b, a, -1.0
    region = classify_region(x, t, p, PotentialParams1D(a, b))
    if region is Region.OMEGA3:
        breaks = (switch_time(x, t, p, PotentialParams1D(a, b)),)
    elif region is Region.OMEGA4:
        breaks = (p / b, t - math.sqrt(2.0 * x / a))
    elif region is Region.OMEGA5:
        breaks = (p / b, t - math.sqrt(-2.0 * x / b))
    else:
        breaks = ()
    return _Path(region, sign, x, t, p, a, b, breaks)


def _as_times(s, t):
    arr = np.asarray(s, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0) or np.any(arr > t):
        raise ValueError(f"running time must lie in [0, {t}]")
    return arr


def _positions(path: _Path, s):
    x, t, p, a, b = path.x, path.t, path.p, path.a, path.b
    if path.region is Region.OMEGA1:
        return x - p * (t - s) - 0.5 * a * (t * t - s * s)
    if path.region is Region.OMEGA2:
        return x - p * (t - s) + 0.5 * b * (t * t - s * s)
    if path.region is Region.OMEGA3:
        tau = path.breaks[0]
        return np.where(s < tau,
                        -p * (tau - s) + 0.5 * b * (tau * tau - s * s),
                        (p - b * tau) * (s - tau) + 0.5 * a * (s - tau) ** 2)
    t1, t2 = path.breaks
    first = -(p - b * s) ** 2 / (2.0 * b)
    if path.region is Region.OMEGA4:
        last = 0.5 * a * (s - t2) ** 2
    else:
        last = -0.5 * b * (s - t2) ** 2
    return np.where(s < t1, first, np.where(s < t2, 0.0, last))


def _velocities(path: _Path, s):
    t, p, a, b = path.t, path.p, path.a, path.b
    if path.region is Region.OMEGA1:
        return p + a * s
    if path.region is Region.OMEGA2:
        return p - b * s
    if path.region is Region.OMEGA3:
        tau = path.breaks[0]
        return np.where(s < tau, p - b * s, (p - b * tau) + a * (s - tau))
    t1, t2 = path.breaks
    last = a * (s - t2) if path.region is Region.OMEGA4 else -b * (s - t2)
    return np.where(s < t1, p - b * s, np.where(s < t2, 0.0, last))


def _finish(values, sign):
    out = sign * np.asarray(values, dtype=float)
    return float(out) if out.ndim == 0 else out


def trajectory(s, x: float, t: float, p: float, params: PotentialParams1D):
    """Optimal path ``gamma(s; x, t, p, a, b)`` at running time(s) ``s``.

    ``s`` may be a scalar or an array with entries in ``[0, t]``; ``t`` must
    be positive.  ``gamma(t) == x`` exactly.
    """
    path = _path(x, t, p, params)
    s_arr = _as_times(s, t)
    out = _finish(_positions(path, s_arr + 0.0 * path.x), path.sign)
    # pin the terminal constraint against rounding in the last segment
    if np.ndim(out) == 0:
        return float(x) if s_arr == t else out
    out[s_arr == t] = x
    return out


def trajectory_velocity(s, x: float, t: float, p: float, params: PotentialParams1D):
    """Analytic time derivative of ``trajectory`` (right-continuous at breakpoints)."""
    path = _path(x, t, p, params)
    s_arr = _as_times(s, t)
    return _finish(_velocities(path, s_arr + 0.0 * path.x), path.sign)


def trajectory_breakpoints(x: float, t: float, p: float, params: PotentialParams1D) -> tuple:
    """Interior times where the trajectory switches formula (may be empty)."""
    path = _path(x, t, p, params)
    return tuple(float(v) for v in path.breaks)


def trajectory_region(x: float, t: float, p: float, params: PotentialParams1D) -> Region:
    """Region of the (possibly reflected) point that selects the trajectory formula."""
    return _path(x, t, p, params).region
