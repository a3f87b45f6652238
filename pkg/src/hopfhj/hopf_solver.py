"""High-dimensional solvers built from the 1D pieces.

The value at ``(x, t)`` is ``max_p sum_i V(x_i, t; p_i, a_i, b_i) - Phi*(p)``.
Quadratic costs separate into scalar prox problems; other convex costs go
through ADMM; a minimum of convex costs is solved branch by branch; an
affine change of variables ``x = P y + u0`` reduces the general problem to
the separable one.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve

from . import core1d
from ._backend import kernels
from .initial_costs import (MinOfConvexCost, QuadraticCost, minplus_components,
                            moreau_v_update)
from .prox1d import DEFAULT_NEWTON, NewtonConfig, prox_neg_value_many

REF_A_HEAD = (4.0, 6.0)
REF_B_HEAD = (3.0, 9.0)


def reference_potential(n: int):
    """Slope vectors ``(a, b)`` of the reference experiments."""
    a = np.full(n, 5.0)
    b = np.full(n, 6.0)
    k = min(n, 2)
    a[:k] = REF_A_HEAD[:k]
    b[:k] = REF_B_HEAD[:k]
    return a, b


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class AffineTransform:
    """``x = P y + u0``; ``P`` is LU-factored once."""

    P: np.ndarray
    u0: np.ndarray
    _lu: tuple = field(init=False, repr=False)

    def __post_init__(self):
        P = np.array(self.P, dtype=np.float64)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ValueError("P must be square")
        u0 = np.zeros(P.shape[0]) if self.u0 is None else np.array(self.u0, dtype=np.float64)
        if u0.shape != (P.shape[0],):
            raise ValueError("u0 must match P")
        if not (np.all(np.isfinite(P)) and np.all(np.isfinite(u0))):
            raise ValueError("transform must be finite")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", LinAlgWarning)  # singularity is reported below
            lu = lu_factor(P, check_finite=True)
        piv_diag = np.abs(np.diag(lu[0]))
        if np.min(piv_diag) <= 1e-14 * max(np.max(piv_diag), 1.0):
            raise ValueError("P is singular")
        P.setflags(write=False)
        u0.setflags(write=False)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "u0", u0)
        object.__setattr__(self, "_lu", lu)

    @property
    def M(self):
        """Kinetic matrix ``P P^T``."""
        return self.P @ self.P.T

    def to_local(self, x):
        return lu_solve(self._lu, np.asarray(x, dtype=np.float64) - self.u0)

    def to_global(self, y):
        y = np.asarray(y, dtype=np.float64)
        return y @ self.P.T + self.u0


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Potential slopes, initial cost, and an optional change of variables."""

    a: np.ndarray
    b: np.ndarray
    cost: object
    transform: AffineTransform | None = None
    _local_cost: object = field(init=False, repr=False)

    def __post_init__(self):
        a = np.array(self.a, dtype=np.float64).reshape(-1)
        b = np.array(self.b, dtype=np.float64).reshape(-1)
        if a.size == 0 or a.shape != b.shape:
            raise ValueError("a and b must be non-empty vectors of equal length")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("a and b must be finite")
        if np.any(a <= 0) or np.any(b <= 0):
            raise ValueError("a and b must be positive")
        if getattr(self.cost, "n", a.size) != a.size:
            raise ValueError(f"cost dimension {self.cost.n} does not match n={a.size}")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        tr = self.transform
        if tr is not None:
            if not isinstance(tr, AffineTransform):
                tr = AffineTransform(*tr)
                object.__setattr__(self, "transform", tr)
            if tr.P.shape[0] != a.size:
                raise ValueError("transform dimension does not match n")
            local = self.cost.transformed(tr.P, tr.u0)
        else:
            local = self.cost
        object.__setattr__(self, "_local_cost", local)

    @property
    def n(self) -> int:
        return self.a.size

    @property
    def local_cost(self):
        """Cost in the coordinates ``y = P^{-1}(x - u0)`` (the cost itself without a transform)."""
        return self._local_cost

    @property
    def kinetic_matrix(self):
        return np.eye(self.n) if self.transform is None else self.transform.M

    def local_problem(self) -> "ProblemSpec":
        if self.transform is None:
            return self
        return ProblemSpec(self.a, self.b, self._local_cost)

    def potential(self, x):
        """U(x); rows of a 2D array are treated as separate points."""
        x = np.asarray(x, dtype=np.float64)
        y = x if self.transform is None else self._to_local_rows(x)
        u = np.where(y >= 0, -self.a * y, self.b * y)
        return u.sum(axis=-1)

    def _to_local_rows(self, x):
        if x.ndim == 1:
            return self.transform.to_local(x)
        return lu_solve(self.transform._lu, (x - self.transform.u0).T).T

    def initial_cost(self, x) -> float:
        return float(self.cost.evaluate(np.asarray(x, dtype=np.float64)))


@dataclass(frozen=True)
class AdmmConfig:
    lam: float = 1.0
    eps: float = 1e-8
    max_iter: int = 10_000
    d0: np.ndarray | None = None
    w0: np.ndarray | None = None
    newton: NewtonConfig = DEFAULT_NEWTON
    keep_history: bool = False

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ValueError("lam must be positive")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


DEFAULT_ADMM = AdmmConfig()


@dataclass(frozen=True)
class SolveResult:
    value: float
    p_star: np.ndarray
    iterations: int
    converged: bool
    residuals: tuple = (0.0, 0.0, 0.0)
    branch: int | None = None
    branch_values: tuple | None = None
    history: tuple | None = None
    local_x: np.ndarray | None = None
    admm_state: tuple | None = None  # final (d, w), for warm restarts


@dataclass(frozen=True)
class TrajectorySample:
    times: np.ndarray
    states: np.ndarray
    velocities: np.ndarray
    breakpoints: tuple = ()


def _as_point(x, t, n):
    x = np.ascontiguousarray(x, dtype=np.float64).reshape(-1)
    if x.shape != (n,):
        raise ValueError(f"x must have length {n}, got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("x must be finite")
    t = float(t)
    if not (math.isfinite(t) and t >= 0):
        raise ValueError("t must be non-negative and finite")
    return x, t


def _initial_result(x, spec_cost, n):
    grad = getattr(spec_cost, "gradient", None)
    p = grad(x) if grad is not None else np.full(n, np.nan)
    return SolveResult(float(spec_cost.evaluate(x)), np.asarray(p, dtype=float), 0, True)


def solve_quadratic(x, t, spec: ProblemSpec, newton: NewtonConfig = DEFAULT_NEWTON) -> SolveResult:
    """Separable solve for ``Phi(x) = sum (x_i - y_i)^2 / (2 w_i) + alpha``."""
    cost = spec.cost
    if spec.transform is not None or not isinstance(cost, QuadraticCost):
        raise TypeError("solve_quadratic needs an untransformed QuadraticCost")
    x, t = _as_point(x, t, spec.n)
    if t == 0:
        return _initial_result(x, cost, spec.n)
    w = np.ascontiguousarray(cost.weights)
    c = -cost.center / w
    p, _, iters, ok = prox_neg_value_many(x, t, c, w, spec.a, spec.b, newton)
    value = kernels.value_sum(x, t, p, spec.a, spec.b) - cost.conjugate(p)
    return SolveResult(float(value), p, iters, ok)


def _conjugate_prox(cost):
    if hasattr(cost, "prox_conjugate"):
        return cost.prox_conjugate
    if hasattr(cost, "prox_scaled"):
        return lambda z, lam: moreau_v_update(z, cost.prox_scaled, lam)
    raise TypeError(f"{type(cost).__name__} provides no proximal operator")


def solve_admm(x, t, spec: ProblemSpec, cfg: AdmmConfig = DEFAULT_ADMM) -> SolveResult:
    """ADMM on the Hopf formula for any convex cost with a prox.

    Splits ``p`` into ``v`` (handled by the prox of ``Phi*``) and ``d``
    (handled coordinatewise by the exact scalar prox of ``-V``).  Stops once
    ``|v - v_prev|^2``, ``|d - d_prev|^2`` and ``|v - d|^2`` are all below
    ``eps``; otherwise returns the last iterate with ``converged=False``.
    """
    if spec.transform is not None:
        raise TypeError("use solve_general for transformed problems")
    cost = spec.cost
    if isinstance(cost, MinOfConvexCost):
        raise TypeError("solve_admm needs a convex cost; use solve_minplus")
    n = spec.n
    x, t = _as_point(x, t, n)
    if t == 0:
        return _initial_result(x, cost, n)
    prox_v = _conjugate_prox(cost)
    lam = float(cfg.lam)
    eps = cfg.eps
    d = x.copy() if cfg.d0 is None else np.array(cfg.d0, dtype=np.float64)
    w = np.zeros(n) if cfg.w0 is None else np.array(cfg.w0, dtype=np.float64)
    if d.shape != (n,) or w.shape != (n,):
        raise ValueError("d0 and w0 must have length n")
    lam_vec = np.full(n, lam)
    warm = np.full(n, np.nan)
    warm_out = np.empty(n)
    d_new = np.empty(n)
    c = np.empty(n)
    ncfg = cfg.newton
    v_prev = None
    history = [] if cfg.keep_history else None
    res = (math.inf, math.inf, math.inf)
    converged = False
    k = 0
    a, b = spec.a, spec.b
    while k < cfg.max_iter:
        k += 1
        v = np.asarray(prox_v(d - w, lam), dtype=np.float64)
        np.add(v, w, out=c)
        kernels.prox_many(x, t, a, b, c, lam_vec, ncfg.tol, ncfg.max_iter, ncfg.fixed_iter,
                          warm, d_new, warm_out)
        warm, warm_out = warm_out, warm
        w += v - d_new
        r_v = math.inf if v_prev is None else float(np.dot(v - v_prev, v - v_prev))
        dd = d_new - d
        vd = v - d_new
        res = (r_v, float(np.dot(dd, dd)), float(np.dot(vd, vd)))
        d, d_new = d_new, d
        v_prev = v
        if history is not None:
            history.append(kernels.value_sum(x, t, d, a, b) - cost.conjugate(v))
        if res[0] <= eps and res[1] <= eps and res[2] <= eps:
            converged = True
            break
    value = kernels.value_sum(x, t, v_prev, a, b) - cost.conjugate(v_prev)
    return SolveResult(float(value), v_prev, k, converged, res,
                       history=None if history is None else tuple(history),
                       admm_state=(d.copy(), w.copy()))


def solve_convex(x, t, spec: ProblemSpec, cfg: AdmmConfig = DEFAULT_ADMM) -> SolveResult:
    """Closed-form route for quadratic costs, ADMM otherwise."""
    if isinstance(spec.cost, QuadraticCost) and spec.transform is None:
        return solve_quadratic(x, t, spec, cfg.newton)
    return solve_admm(x, t, spec, cfg)


def solve_minplus(x, t, spec: ProblemSpec, cfg: AdmmConfig = DEFAULT_ADMM) -> SolveResult:
    """Minimum over branch solves; ties go to the lowest branch index."""
    if spec.transform is not None:
        raise TypeError("use solve_general for transformed problems")
    branches = minplus_components(spec.cost)
    x, t = _as_point(x, t, spec.n)
    best = None
    r = -1
    values = []
    for j, br in enumerate(branches):
        res = solve_convex(x, t, ProblemSpec(spec.a, spec.b, br), cfg)
        values.append(res.value)
        if best is None or res.value < best.value:
            best, r = res, j
    return SolveResult(best.value, best.p_star, best.iterations, best.converged,
                       best.residuals, branch=r, branch_values=tuple(values),
                       history=best.history)


def _solve_untransformed(x, t, spec, cfg):
    if isinstance(spec.cost, MinOfConvexCost):
        return solve_minplus(x, t, spec, cfg)
    return solve_convex(x, t, spec, cfg)


def solve_general(x, t, spec: ProblemSpec, cfg: AdmmConfig = DEFAULT_ADMM) -> SolveResult:
    """Solve in the coordinates ``y = P^{-1}(x - u0)``.

    ``p_star`` is reported in those coordinates (it is the maximizer of the
    transformed Hopf formula); ``local_x`` holds ``y``.
    """
    if spec.transform is None:
        raise TypeError("solve_general needs a transform")
    x, t = _as_point(x, t, spec.n)
    y = spec.transform.to_local(x)
    res = _solve_untransformed(y, t, spec.local_problem(), cfg)
    return SolveResult(res.value, res.p_star, res.iterations, res.converged, res.residuals,
                       res.branch, res.branch_values, res.history, local_x=y)


def solve(x, t, spec: ProblemSpec, cfg: AdmmConfig = DEFAULT_ADMM) -> SolveResult:
    """Dispatch on the cost and transform."""
    if spec.transform is not None:
        return solve_general(x, t, spec, cfg)
    return _solve_untransformed(x, t, spec, cfg)


def _component_params(spec):
    return [core1d.PotentialParams1D(ai, bi) for ai, bi in zip(spec.a, spec.b)]


def trajectory_breakpoints(x, t, result: SolveResult, spec: ProblemSpec) -> tuple:
    """Sorted interior times where some component switches formula."""
    y = np.asarray(x, dtype=float) if result.local_x is None else result.local_x
    pts = set()
    for yi, pi, pr in zip(y, result.p_star, _component_params(spec)):
        for s in core1d.trajectory_breakpoints(float(yi), t, float(pi), pr):
            if 0.0 < s < t:
                pts.add(float(s))
    return tuple(sorted(pts))


def optimal_trajectory(x, t, result: SolveResult, spec: ProblemSpec, times) -> TrajectorySample:
    """Optimal path sampled at ``times`` (each in ``[0, t]``)."""
    x, t = _as_point(x, t, spec.n)
    if t <= 0:
        raise ValueError("trajectories need t > 0")
    s = np.asarray(times, dtype=np.float64).reshape(-1)
    if np.any(~np.isfinite(s)) or np.any(s < 0) or np.any(s > t):
        raise ValueError(f"times must lie in [0, {t}]")
    y = x if result.local_x is None else result.local_x
    states = np.empty((s.size, spec.n))
    vel = np.empty((s.size, spec.n))
    for i, pr in enumerate(_component_params(spec)):
        states[:, i] = core1d.trajectory(s, float(y[i]), t, float(result.p_star[i]), pr)
        vel[:, i] = core1d.trajectory_velocity(s, float(y[i]), t, float(result.p_star[i]), pr)
    if spec.transform is not None:
        states = spec.transform.to_global(states)
        vel = vel @ spec.transform.P.T
    states[s == t] = x
    return TrajectorySample(s, states, vel, trajectory_breakpoints(x, t, result, spec))


class OptimalPath:
    """Callable view of the optimal path, for quadrature-based checks."""

    def __init__(self, x, t, result: SolveResult, spec: ProblemSpec):
        self.x = np.asarray(x, dtype=float)
        self.t = float(t)
        self._result = result
        self._spec = spec
        self.breakpoints = trajectory_breakpoints(x, t, result, spec)

    def _sample(self, s):
        return optimal_trajectory(self.x, self.t, self._result, self._spec, np.atleast_1d(s))

    def position(self, s):
        return self._sample(s).states

    def velocity(self, s):
        return self._sample(s).velocities
