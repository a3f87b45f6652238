"""Quick invariant suites, run by ``hopfhj`` in verify mode.

Each suite returns a list of ``Check`` records.  Sizes are small so a suite
finishes in seconds; the pytest acceptance suite runs the full-size versions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import core1d, oracle, prox1d
from ._backend import available_backends
from .core1d import PotentialParams1D
from .hopf_solver import (AdmmConfig, AffineTransform, ProblemSpec, optimal_trajectory,
                          reference_potential, solve, solve_admm, solve_minplus, solve_quadratic)
from .initial_costs import (EllipsoidNormCost, LinearCost, QuadraticCost, ShiftedL1SquaredCost,
                            reference_minplus_example, project_ellipsoid)


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


def _check(name, worst, tol):
    return Check(name, bool(worst <= tol), f"worst={worst:.3g} tol={tol:.3g}")


def _interior_sample(rng, count, margin=1e-3):
    out = []
    while len(out) < count:
        x, t, p = rng.uniform(-4, 4), rng.uniform(0.05, 2), rng.uniform(-4, 4)
        a, b = rng.uniform(0.5, 6, 2)
        xr, pr, ar, br = (-x, -p, b, a) if p < 0 else (x, p, a, b)
        if oracle.distance_to_region_boundary(xr, t, pr, ar, br) >= margin and abs(pr) > margin:
            out.append((x, t, p, PotentialParams1D(a, b)))
    return out


def core1d_suite(rng) -> list:
    checks = []
    ex = [core1d.value(1, 0, 3, PotentialParams1D(4, 3)) - 3,
          core1d.value(1, 1, 0, PotentialParams1D(1, 1)) - 5 / 6,
          core1d.value(0, 2, 1, PotentialParams1D(1, 1)) + 1 / 6]
    checks.append(_check("core1d: worked examples", max(abs(e) for e in ex), 1e-14))
    pts = _interior_sample(rng, 500)
    checks.append(_check("core1d: analytic HJ residual",
                         max(abs(core1d.hj_residual(x, t, p, pr)) for x, t, p, pr in pts), 1e-10))
    checks.append(_check("core1d: gamma(0) equals dV/dp",
                         max(abs(core1d.trajectory(0.0, x, t, p, pr) - core1d.value_dp(x, t, p, pr))
                             for x, t, p, pr in pts), 1e-10))
    checks.append(_check("core1d: reflection symmetry",
                         max(abs(core1d.value(x, t, p, pr) - core1d.value(-x, t, -p, pr.swapped()))
                             for x, t, p, pr in pts), 1e-12))
    checks.append(_check("core1d: agrees with literal region formulas",
                         max(abs(core1d.value(x, t, p, pr) - oracle.literal_value_1d(x, t, p, pr.a, pr.b))
                             / (1 + abs(core1d.value(x, t, p, pr))) for x, t, p, pr in pts), 1e-12))
    return checks


def prox1d_suite(rng) -> list:
    worst_stat = 0.0
    worst_grid = 0.0
    for i in range(200):
        q = prox1d.ProxQuery(rng.uniform(-4, 4), rng.uniform(0.01, 1), rng.uniform(-4, 4),
                             rng.uniform(0.5, 2), PotentialParams1D(*rng.uniform(0.5, 6, 2)))
        r = prox1d.prox_neg_value(q)
        worst_stat = max(worst_stat, abs(prox1d.stationarity_residual(r.p_star, q)))
        if i < 20:
            g = oracle.grid_argmin_1d(
                lambda p: -oracle.literal_value_1d(q.x, q.t, p, q.params.a, q.params.b)
                + q.lam / 2 * (p - q.c) ** 2, -20, 20, 10 ** 5)
            worst_grid = max(worst_grid, abs(g - r.p_star))
    return [_check("prox1d: stationarity residual", worst_stat, 1e-8),
            _check("prox1d: matches grid oracle", worst_grid, 2 * 40 / 10 ** 5)]


def initial_costs_suite(rng) -> list:
    n = 4
    costs = [QuadraticCost(rng.normal(size=n), 1.5, 0.3), EllipsoidNormCost(np.diag([1, 8, 3, 5.0])),
             ShiftedL1SquaredCost(np.ones(n)), LinearCost(rng.normal(size=n))]
    moreau = 0.0
    firm = 0.0
    fy = 0.0
    for c in costs:
        for _ in range(100):
            z1, z2 = rng.normal(size=n) * 3, rng.normal(size=n) * 3
            lam = rng.uniform(0.3, 3)
            v1, v2 = c.prox_conjugate(z1, lam), c.prox_conjugate(z2, lam)
            moreau = max(moreau, float(np.max(np.abs(v1 + c.prox_scaled(z1, lam) - z1))))
            dv = v1 - v2
            firm = max(firm, float(dv @ dv - dv @ (z1 - z2)))
            x = rng.normal(size=n) * 2
            conj = c.conjugate(v1)
            if np.isfinite(conj):
                fy = max(fy, float(x @ v1 - c.evaluate(x) - conj))
    kkt = 0.0
    M = np.diag([1, 8, 3, 5.0])
    for _ in range(100):
        v = project_ellipsoid(rng.normal(size=n) * 5, M)
        q = float(v @ np.linalg.solve(M, v))
        kkt = max(kkt, abs(q - 1) if q > 1 - 1e-6 else 0.0)
    return [_check("initial_costs: Moreau identity", moreau, 1e-12),
            _check("initial_costs: firm non-expansiveness", firm, 1e-10),
            _check("initial_costs: Fenchel-Young inequality", fy, 1e-10),
            _check("initial_costs: ellipsoid projection on boundary", kkt, 1e-10)]


def hopf_solver_suite(rng) -> list:
    n = 10
    a, b = reference_potential(n)
    quad = ProblemSpec(a, b, QuadraticCost(np.ones(n)))
    dv = 0.0
    sep = 0.0
    for _ in range(30):
        x, t = rng.uniform(-4, 4, n), rng.uniform(0.01, 0.5)
        r1, r2 = solve_quadratic(x, t, quad), solve_admm(x, t, quad)
        dv = max(dv, abs(r1.value - r2.value))
        i = int(rng.integers(n))
        r1d = solve_quadratic(x[i:i + 1], t, ProblemSpec(a[i:i + 1], b[i:i + 1], QuadraticCost([1.0])))
        sep = max(sep, abs(r1d.p_star[0] - r1.p_star[i]))
    mp = ProblemSpec(a, b, reference_minplus_example(n))
    dom = True
    for _ in range(30):
        x, t = rng.uniform(-4, 4, n), rng.uniform(0.0, 0.5)
        r = solve_minplus(x, t, mp)
        dom = dom and r.value == r.branch_values[r.branch] and all(r.value <= v for v in r.branch_values)
    ident = ProblemSpec(a, b, QuadraticCost(np.ones(n)), AffineTransform(np.eye(n), np.zeros(n)))
    idd = max(abs(solve(x, t, ident).value - solve(x, t, quad).value)
              for x, t in [(rng.uniform(-4, 4, n), rng.uniform(0.01, 0.5)) for _ in range(20)])
    x, t = rng.uniform(-4, 4, n), 0.3
    r = solve(x, t, quad)
    tr = optimal_trajectory(x, t, r, quad, np.linspace(0, t, 11))
    return [_check("hopf_solver: ADMM matches closed form (value)", dv, 1e-6),
            _check("hopf_solver: separable consistency", sep, 1e-10),
            Check("hopf_solver: min-plus dominance", dom, "exact comparisons"),
            _check("hopf_solver: identity transform", idd, 1e-12),
            _check("hopf_solver: trajectory endpoint", float(np.max(np.abs(tr.states[-1] - x))), 1e-12)]


def oracle_suite(rng) -> list:
    worst = 0.0
    for x, t, p, pr in _interior_sample(rng, 50):
        path = oracle.FunctionPath(lambda s, x=x, t=t, p=p, pr=pr: core1d.trajectory(s, x, t, p, pr),
                                   lambda s, x=x, t=t, p=p, pr=pr: core1d.trajectory_velocity(s, x, t, p, pr),
                                   t, core1d.trajectory_breakpoints(x, t, p, pr))
        cost = oracle.trajectory_cost(path, pr.potential, lambda g, p=p: p * g, quad_panels=2000)
        worst = max(worst, abs(cost - core1d.value(x, t, p, pr)))
    fd = max(oracle.pde_residual(lambda y, s, p=p, pr=pr: core1d.value(float(y[0]), s, p, pr),
                                 np.array([x]), t, np.eye(1), lambda y, pr=pr: pr.potential(float(y[0])))
             for x, t, p, pr in _interior_sample(rng, 50, margin=1e-2))
    return [_check("oracle: trajectory cost equals value", worst, 1e-8),
            _check("oracle: finite-difference HJ residual", fd, 1e-5)]


def backends_suite(rng) -> list:
    mods = available_backends()
    if len(mods) < 2:
        return [Check("backends: compiled extension present", False, "only the Python backend loaded")]
    py, cc = mods["python"], mods["compiled"]
    worst = 0.0
    for _ in range(2000):
        x, t, p, c = rng.uniform(-4, 4), rng.uniform(0, 2), rng.uniform(-4, 4), rng.uniform(-4, 4)
        a, b, lam = *rng.uniform(0.5, 6, 2), rng.uniform(0.2, 3)
        worst = max(worst, abs(py.value(x, t, p, a, b) - cc.value(x, t, p, a, b)))
        if t > 0:
            worst = max(worst, abs(py.prox(x, t, a, b, c, lam)[0] - cc.prox(x, t, a, b, c, lam)[0]))
    return [_check("backends: compiled matches Python", worst, 1e-12)]


SUITES = {
    "core1d": core1d_suite,
    "prox1d": prox1d_suite,
    "initial_costs": initial_costs_suite,
    "hopf_solver": hopf_solver_suite,
    "oracle": oracle_suite,
    "backends": backends_suite,
}


def run_suite(name: str, seed: int = 0) -> list:
    """Run one suite (or ``"all"``) with a seeded generator."""
    if name == "all":
        out = []
        for key in SUITES:
            out.extend(run_suite(key, seed))
        return out
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)} or 'all'")
    return SUITES[name](np.random.default_rng(seed))
