"""Grid-free Hopf-formula solvers for HJ PDEs with piecewise-affine concave potentials."""

from ._backend import BACKEND
from .core1d import PotentialParams1D, Region
from .hopf_solver import (AdmmConfig, AffineTransform, OptimalPath, ProblemSpec, SolveResult,
                          TrajectorySample, optimal_trajectory, reference_potential, solve, solve_admm,
                          solve_general, solve_minplus, solve_quadratic)
from .initial_costs import (EllipsoidNormCost, LinearCost, MinOfConvexCost, MinOfQuadraticsCost,
                            QuadraticCost, QuadraticFormCost, ShiftedL1SquaredCost)
from .prox1d import NewtonConfig, ProxQuery, prox_neg_value

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "PotentialParams1D", "Region", "AdmmConfig", "AffineTransform", "OptimalPath",
    "ProblemSpec", "SolveResult", "TrajectorySample", "optimal_trajectory", "reference_potential",
    "solve", "solve_admm", "solve_general", "solve_minplus", "solve_quadratic",
    "EllipsoidNormCost", "LinearCost", "MinOfConvexCost", "MinOfQuadraticsCost", "QuadraticCost",
    "QuadraticFormCost", "ShiftedL1SquaredCost", "NewtonConfig", "ProxQuery", "prox_neg_value",
]
