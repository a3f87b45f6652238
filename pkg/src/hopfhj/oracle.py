"""Slow, independent reference computations for testing.

Nothing here calls the analytic kernels or solvers.  The 1D value is
re-implemented from the literal region definitions (vectorized), optima are
found by brute-force grids or a generic convex solver, and derivatives by
finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class OracleConfig:
    grid_points: int = 1_000_000
    fd_step: float = 1e-4
    quad_panels: int = 10_000
    oc_segments: int = 200
    oc_tol: float = 1e-9

    def __post_init__(self):
        for name in ("grid_points", "fd_step", "quad_panels", "oc_segments", "oc_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


def _eval_many(objective, pts):
    try:
        vals = np.asarray(objective(pts), dtype=np.float64)
        if vals.shape == pts.shape:
            return vals
    except (TypeError, ValueError):
        pass
    return np.array([objective(float(p)) for p in pts], dtype=np.float64)


def _golden(objective, lo, hi, iters=80):
    c = hi - _GOLDEN * (hi - lo)
    d = lo + _GOLDEN * (hi - lo)
    fc, fd = objective(c), objective(d)
    for _ in range(iters):
        if hi - lo <= 1e-15 * (1.0 + abs(lo) + abs(hi)):
            break
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - _GOLDEN * (hi - lo)
            fc = objective(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _GOLDEN * (hi - lo)
            fd = objective(d)
    return 0.5 * (lo + hi)


def grid_argmin_1d(objective, lo: float, hi: float, grid_points: int,
                   assume_convex: bool = False) -> float:
    """Grid minimizer of a scalar function, refined by golden section.

    ``objective`` may be vectorized (it is tried on an array first).  With
    ``assume_convex`` the full grid is not materialized: a coarse scan picks
    the winning coarse cell and only the fine points inside it are evaluated,
    which selects the same fine grid point when the objective is unimodal.
    """
    if not lo < hi:
        raise ValueError("need lo < hi")
    if grid_points < 3:
        raise ValueError("need at least 3 grid points")
    h = (hi - lo) / (grid_points - 1)
    if assume_convex and grid_points > 4096:
        coarse_n = 1025
        stride = (grid_points - 1) / (coarse_n - 1)
        ck = np.round(np.arange(coarse_n) * stride).astype(np.int64)
        cv = _eval_many(objective, lo + ck * h)
        if not np.any(np.isfinite(cv)):
            raise ValueError("objective is non-finite on the whole grid")
        j = int(np.nanargmin(np.where(np.isfinite(cv), cv, np.nan)))
        k0 = ck[max(j - 1, 0)]
        k1 = ck[min(j + 1, coarse_n - 1)]
        ks = np.arange(k0, k1 + 1)
    else:
        ks = np.arange(grid_points)
    pts = lo + ks * h
    vals = _eval_many(objective, pts)
    finite = np.isfinite(vals)
    if not np.any(finite):
        raise ValueError("objective is non-finite on the whole grid")
    i = int(np.argmin(np.where(finite, vals, np.inf)))
    k = ks[i]
    a = lo + max(k - 1, 0) * h
    b = lo + min(k + 1, grid_points - 1) * h

    def scalar(p):
        v = float(np.asarray(objective(float(p)), dtype=np.float64).reshape(-1)[0])
        return v if math.isfinite(v) else math.inf

    best = _golden(scalar, a, b)
    return best if scalar(best) <= vals[i] else float(pts[i])


def literal_value_1d(x, t, p, a, b):
    """V(x, t; p, a, b) straight from the five region formulas (vectorized).

    Negative ``p`` is mapped through the reflection before classification.
    """
    x, t, p, a, b = np.broadcast_arrays(*(np.asarray(v, dtype=np.float64) for v in (x, t, p, a, b)))
    neg = p < 0
    x = np.where(neg, -x, x)
    p = np.abs(p)
    a, b = np.where(neg, b, a), np.where(neg, a, b)
    s = t - p / b
    upper = p * t + a * t * t / 2
    om1 = x >= upper
    om2 = ~om1 & (((x < 0) & (s < 0)) | ((s >= 0) & (x < -(b / 2) * s * s)))
    om4 = ~om1 & (s >= 0) & (x >= 0) & (x < (a / 2) * s * s)
    om5 = ~om1 & (s >= 0) & (x < 0) & (x >= -(b / 2) * s * s)
    om3 = ~(om1 | om2 | om4 | om5)
    f1 = -a * a * t ** 3 / 6 - a * p * t * t / 2 + a * t * x - p * p * t / 2 + p * x
    f2 = -b * b * t ** 3 / 6 + b * p * t * t / 2 - p * p * t / 2 + p * x - b * t * x
    k = a + 2 * b
    disc = np.maximum((b * t - p) ** 2 + 2 * x * k, 0.0)
    f3 = ((a + b) / (3 * k * k) * ((b * t - p) ** 3 + disc ** 1.5)
          - b * (b * t - p) * x / k - b * b * t ** 3 / 6 + b * p * t * t / 2 - p * p * t / 2)
    f4 = np.sqrt(8 * a * np.abs(x) ** 3) / 3 - p ** 3 / (6 * b)
    f5 = np.sqrt(8 * b * np.abs(x) ** 3) / 3 - p ** 3 / (6 * b)
    out = np.select([om1, om2, om3, om4, om5], [f1, f2, f3, f4, f5])
    out = np.where(t == 0, np.where(neg, -p, p) * np.where(neg, -x, x), out)
    return out if out.ndim else float(out)


def literal_region_1d(x, t, p, a, b) -> int:
    """Region index 1..5 for ``p >= 0`` from the literal inequalities."""
    s = t - p / b
    if x >= p * t + a * t * t / 2:
        return 1
    if (x < 0 and s < 0) or (s >= 0 and x < -(b / 2) * s * s):
        return 2
    if s >= 0 and 0 <= x < (a / 2) * s * s:
        return 4
    if s >= 0 and -(b / 2) * s * s <= x < 0:
        return 5
    return 3


def distance_to_region_boundary(x, t, p, a, b) -> float:
    """Smallest |x - boundary| over the x-boundaries of the regions at (t, p >= 0)."""
    s = t - p / b
    cands = [abs(x - (p * t + a * t * t / 2)), abs(x)]
    if s >= 0:
        cands += [abs(x - a / 2 * s * s), abs(x + b / 2 * s * s)]
    return min(cands)


def hopf_value_1d_grid(x, t, a, b, conjugate, lo=-20.0, hi=20.0, grid_points=200_001):
    """``max_p V(x, t; p, a, b) - Phi*(p)`` in 1D by dense grid search."""
    p_best = grid_argmin_1d(lambda p: -(literal_value_1d(x, t, p, a, b) - conjugate(p)),
                            lo, hi, grid_points)
    return float(literal_value_1d(x, t, p_best, a, b) - conjugate(p_best)), p_best


def pde_residual(solution, x, t: float, M, potential, fd_step: float = 1e-4) -> float:
    """|V_t + <grad V, M grad V>/2 + U(x)| by central differences."""
    x = np.asarray(x, dtype=np.float64)
    h = float(fd_step)
    if not t - h > 0:
        raise ValueError("need t > fd_step")
    n = x.size
    grad = np.empty(n)
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        grad[i] = (solution(x + e, t) - solution(x - e, t)) / (2 * h)
    vt = (solution(x, t + h) - solution(x, t - h)) / (2 * h)
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    return abs(vt + 0.5 * float(grad @ M @ grad) + float(potential(x)))


@dataclass(frozen=True)
class FunctionPath:
    """A path given by position/velocity callables on ``[0, t]``.

    Both callables take an array of times and return an array of shape
    ``(len(times), n)`` (or ``(len(times),)`` in 1D).
    """

    position: object
    velocity: object
    t: float
    breakpoints: tuple = ()


def _simpson(f, lo, hi, panels):
    if panels % 2:
        panels += 1
    s = np.linspace(lo, hi, panels + 1)
    y = f(s)
    h = (hi - lo) / panels
    return h / 3 * (y[0] + y[-1] + 4 * y[1:-1:2].sum() + 2 * y[2:-1:2].sum())


def _potential_rows(potential, g):
    arg = g[:, 0] if g.shape[1] == 1 else g
    try:
        u = np.asarray(potential(arg), dtype=np.float64)
        if u.shape == (g.shape[0],):
            return u
    except (TypeError, ValueError):
        pass
    return np.array([potential(row if row.size > 1 else float(row[0])) for row in g])


def trajectory_cost(path, potential, initial_cost, M=None, quad_panels: int = 10_000) -> float:
    """``int_0^t |gamma'|^2_{M^-1}/2 - U(gamma) ds + Phi(gamma(0))`` by Simpson.

    The interval is split at the path's breakpoints so every piece has a
    smooth integrand.
    """
    t = float(path.t)
    knots = [0.0] + sorted(float(s) for s in path.breakpoints if 0 < s < t) + [t]
    Minv = None if M is None else np.linalg.inv(np.atleast_2d(M))

    def integrand(s):
        v = np.asarray(path.velocity(s), dtype=np.float64)
        g = np.asarray(path.position(s), dtype=np.float64)
        if v.ndim == 1:
            v, g = v[:, None], g[:, None]
        kin = np.sum(v * v, axis=1) if Minv is None else np.einsum("ki,ij,kj->k", v, Minv, v)
        return 0.5 * kin - _potential_rows(potential, g)

    total = 0.0
    for lo, hi in zip(knots[:-1], knots[1:]):
        if hi > lo:
            m = max(2, int(round(quad_panels * (hi - lo) / t)))
            total += _simpson(integrand, lo, hi, m)
    g0 = np.asarray(path.position(np.array([0.0])), dtype=np.float64).reshape(-1)
    return float(total + initial_cost(g0 if g0.size > 1 else float(g0[0])))


def _cvx_cost(cost, z, cp):
    kind = type(cost).__name__
    if kind == "LinearCost":
        return cost.slope @ z + cost.offset
    if kind == "QuadraticCost":
        w = np.asarray(cost.weights)
        return cp.sum(cp.multiply(1.0 / (2.0 * w), cp.square(z - cost.center))) + cost.offset
    if kind == "EllipsoidNormCost":
        L = np.linalg.cholesky(cost.M)
        return cp.norm(L.T @ (z - cost.center), 2)
    if kind == "ShiftedL1SquaredCost":
        w = np.ones(cost.n) if cost.weights is None else cost.weights
        return 0.5 * cp.square(cp.sum(cp.multiply(w, cp.abs(z - cost.shift))))
    raise TypeError(f"no direct formulation for {kind}")


def direct_oc_solve(x, t: float, spec, oc_segments: int = 200, oc_tol: float = 1e-9) -> float:
    """Value of the discretized optimal control problem.

    The path is piecewise linear on ``oc_segments`` uniform segments with
    its end pinned at ``x``; kinetic energy is exact on each segment and the
    potential term uses the trapezoidal rule.  For convex initial costs the
    problem is a convex program and is solved to optimality with a conic
    solver; a minimum of convex costs is handled branch by branch.
    """
    import cvxpy as cp

    x = np.asarray(x, dtype=np.float64).reshape(-1)
    n = x.size
    if n > 3:
        raise ValueError("direct optimal control is limited to n <= 3")
    if not t > 0:
        raise ValueError("t must be positive")
    cost = spec.cost
    branches = getattr(cost, "branches", None)
    if branches is not None:
        return min(_direct_branch(x, t, spec, br, oc_segments, oc_tol, cp) for br in branches)
    return _direct_branch(x, t, spec, cost, oc_segments, oc_tol, cp)


def _direct_branch(x, t, spec, cost, K, tol, cp):
    n = x.size
    h = t / K
    if spec.transform is None:
        Pinv, u0, Linv = np.eye(n), np.zeros(n), np.eye(n)
    else:
        P = np.asarray(spec.transform.P)
        Pinv, u0 = np.linalg.inv(P), np.asarray(spec.transform.u0)
        Linv = np.linalg.inv(np.linalg.cholesky(P @ P.T))
    G = cp.Variable((K, n))  # nodes 0..K-1; node K is x
    nodes = cp.vstack([G, x[None, :]])
    steps = nodes[1:] - nodes[:-1]
    kinetic = cp.sum_squares(steps @ Linv.T) / (2 * h)
    Y = (nodes - np.ones((K + 1, 1)) @ u0[None, :]) @ Pinv.T
    neg_u = cp.sum(cp.maximum(Y @ np.diag(spec.a), -(Y @ np.diag(spec.b))), axis=1)
    wts = np.full(K + 1, h)
    wts[0] = wts[-1] = h / 2
    objective = kinetic + wts @ neg_u + _cvx_cost(cost, G[0], cp)
    prob = cp.Problem(cp.Minimize(objective))
    try:
        prob.solve(solver=cp.CLARABEL, tol_gap_abs=tol, tol_gap_rel=tol, tol_feas=tol)
    except (cp.error.SolverError, TypeError):
        prob.solve()
    if prob.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
        raise RuntimeError(f"direct optimal control solve failed: {prob.status}")
    return float(prob.value)
