import numpy as np
import pytest

from hopfhj import core1d, oracle
from hopfhj.core1d import PotentialParams1D
from hopfhj.hopf_solver import ProblemSpec, reference_potential, solve_quadratic
from hopfhj.initial_costs import LinearCost, QuadraticCost
from hopfhj.oracle import FunctionPath, OracleConfig


def test_config_validation():
    assert OracleConfig().grid_points == 10 ** 6
    with pytest.raises(ValueError):
        OracleConfig(fd_step=0)


@pytest.mark.parametrize("convex", [False, True])
def test_grid_argmin_quadratic(convex):
    g = oracle.grid_argmin_1d(lambda p: (p - 2) ** 2, -10, 10, 10 ** 6, assume_convex=convex)
    assert abs(g - 2) <= 4e-5


def test_grid_argmin_scalar_objective_and_errors():
    assert oracle.grid_argmin_1d(lambda p: abs(float(p) + 1.25), -3, 3, 1001) == pytest.approx(-1.25, abs=1e-8)
    with pytest.raises(ValueError):
        oracle.grid_argmin_1d(lambda p: np.full_like(p, np.nan), 0, 1, 100)
    with pytest.raises(ValueError):
        oracle.grid_argmin_1d(lambda p: p, 1, 0, 100)


def test_grid_argmin_non_convex_finds_global():
    f = lambda p: np.minimum((p + 3) ** 2 + 0.1, (p - 4) ** 2)
    assert oracle.grid_argmin_1d(f, -10, 10, 10 ** 5) == pytest.approx(4, abs=1e-6)


def test_literal_region_examples():
    assert oracle.literal_region_1d(1, 1, 0, 1, 1) == 1
    assert oracle.literal_region_1d(0, 2, 1, 1, 1) == 4
    assert oracle.literal_value_1d(0, 2, 1, 1, 1) == pytest.approx(-1 / 6)


def test_pde_residual_linear_cost(rng):
    done = 0
    while done < 100:
        x, t, p = rng.uniform(-4, 4), rng.uniform(0.05, 2), rng.uniform(0, 4)
        a, b = rng.uniform(0.5, 6, 2)
        if oracle.distance_to_region_boundary(x, t, p, a, b) < 1e-2:
            continue
        pr = PotentialParams1D(a, b)
        res = oracle.pde_residual(lambda y, s: core1d.value(float(y[0]), s, p, pr), np.array([x]), t,
                                  np.eye(1), lambda y: pr.potential(float(y[0])))
        assert res <= 1e-5
        done += 1


def test_pde_residual_quadratic_n4(rng):
    a, b = reference_potential(4)
    spec = ProblemSpec(a, b, QuadraticCost(np.ones(4)))
    sol = lambda y, s: solve_quadratic(y, s, spec).value
    worst = []
    for _ in range(40):
        x, t = rng.uniform(-4, 4, 4), rng.uniform(0.05, 0.5)
        worst.append(oracle.pde_residual(sol, x, t, np.eye(4), spec.potential))
    # C1 solutions: only stencils that straddle a seam can exceed the bound
    assert np.median(worst) <= 1e-6
    assert np.mean(np.array(worst) <= 1e-4) >= 0.9


def test_pde_residual_vanishing_potential(rng):
    eps = 1e-6
    spec = ProblemSpec([eps] * 2, [eps] * 2, QuadraticCost(np.ones(2)))
    for _ in range(10):
        x, t = rng.uniform(-3, 3, 2), rng.uniform(0.1, 1)
        r = oracle.pde_residual(lambda y, s: solve_quadratic(y, s, spec).value, x, t, np.eye(2),
                                lambda y: 0.0)
        assert r <= 1e-5 + 10 * eps * np.sum(np.abs(x))


def test_trajectory_cost_static_path():
    path = FunctionPath(lambda s: np.zeros_like(s), lambda s: np.zeros_like(s), 1.0)
    assert oracle.trajectory_cost(path, lambda g: 0.0, lambda g: 2.5) == 2.5


def test_trajectory_cost_omega1():
    x, t, p = 3.0, 1.0, 0.5
    pr = PotentialParams1D(1.0, 1.0)
    assert core1d.classify_region(x, t, p, pr).value == 1
    path = FunctionPath(lambda s: core1d.trajectory(s, x, t, p, pr),
                        lambda s: core1d.trajectory_velocity(s, x, t, p, pr), t)
    cost = oracle.trajectory_cost(path, pr.potential, lambda g: p * g, quad_panels=10)
    assert cost == pytest.approx(core1d.value(x, t, p, pr), abs=1e-12)


def test_direct_oc_free_motion():
    eps = 1e-6
    spec = ProblemSpec([eps] * 2, [eps] * 2, QuadraticCost(np.ones(2)))
    x, t = np.array([0.5, -1.5]), 0.4
    exact = 0.5 * np.sum((x - 1) ** 2) / (1 + t)
    assert oracle.direct_oc_solve(x, t, spec) == pytest.approx(exact, abs=1e-3)


def test_direct_oc_linear_1d():
    pr = PotentialParams1D(2.0, 3.0)
    spec = ProblemSpec([2.0], [3.0], LinearCost([0.8]))
    for x, t in [(1.0, 0.5), (-0.4, 1.0), (0.2, 2.0)]:
        assert oracle.direct_oc_solve([x], t, spec) == pytest.approx(core1d.value(x, t, 0.8, pr), abs=1e-2)


def test_direct_oc_quadratic_2d_and_refinement(rng):
    a, b = reference_potential(2)
    spec = ProblemSpec(a, b, QuadraticCost(np.ones(2)))
    for _ in range(3):
        x, t = rng.uniform(-4, 4, 2), rng.uniform(0.05, 0.5)
        v = solve_quadratic(x, t, spec).value
        gaps = [abs(oracle.direct_oc_solve(x, t, spec, k) - v) for k in (100, 200, 400)]
        assert gaps[1] <= 1e-2
        assert gaps[0] > gaps[1] > gaps[2]


def test_direct_oc_rejects_large_n():
    spec = ProblemSpec(*reference_potential(4), QuadraticCost(np.ones(4)))
    with pytest.raises(ValueError):
        oracle.direct_oc_solve(np.zeros(4), 0.3, spec)
