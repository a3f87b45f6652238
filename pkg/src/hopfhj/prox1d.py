"""Scalar proximal point of ``p -> -V(x, t; p, a, b) / lam``.

Solves ``argmin_p -V(x, t; p, a, b) + lam/2 (p - c)^2`` exactly.  Two
candidates are closed-form stationary points of the one-sided pieces, one
is the root on the piece whose trajectory crosses the kink (bracketed
Newton), and one is the closed-form root of the dwell-at-zero piece.  The
objective is strictly convex, so the candidate with the smallest objective
is the minimizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .core1d import PotentialParams1D

CANDIDATES = {1: "p1", 2: "p2", 3: "p3", 4: "p4"}

#: Newton steps used by the fixed-latency mode.
FIXED_NEWTON_STEPS = 20


@dataclass(frozen=True)
class NewtonConfig:
    """Stopping rule for the Newton solve of the crossing-branch candidate.

    With ``fixed_iter > 0`` exactly that many safeguarded Newton steps are
    taken regardless of the residual (fixed-latency mode).
    """

    tol: float = 1e-12
    max_iter: int = 50
    fixed_iter: int = 0

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.fixed_iter < 0:
            raise ValueError("fixed_iter must be non-negative")

    @classmethod
    def fixed(cls, steps: int = FIXED_NEWTON_STEPS) -> "NewtonConfig":
        return cls(fixed_iter=steps)


DEFAULT_NEWTON = NewtonConfig()


@dataclass(frozen=True)
class ProxQuery:
    x: float
    t: float
    c: float
    lam: float
    params: PotentialParams1D

    def __post_init__(self):
        for name in ("x", "t", "c", "lam"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, v)
        if self.t <= 0:
            raise ValueError("t must be positive")
        if self.lam <= 0:
            raise ValueError("lam must be positive")


@dataclass(frozen=True)
class ProxResult:
    p_star: float
    candidate: str
    iterations: int
    converged: bool
    p3: float


def objective(p: float, query: ProxQuery) -> float:
    """``-V(x, t; p, a, b) + lam/2 (p - c)^2``."""
    pr = query.params
    return -kernels.value(query.x, query.t, float(p), pr.a, pr.b) + 0.5 * query.lam * (p - query.c) ** 2


def stationarity_residual(p: float, query: ProxQuery) -> float:
    """Derivative of ``objective``; zero exactly at the minimizer."""
    pr = query.params
    return -kernels.value_dp(query.x, query.t, float(p), pr.a, pr.b) + query.lam * (p - query.c)


def prox_neg_value(query: ProxQuery, cfg: NewtonConfig = DEFAULT_NEWTON,
                   warm_start: float | None = None) -> ProxResult:
    """Exact minimizer of ``-V(x, t; p, a, b) + lam/2 (p - c)^2``.

    ``warm_start`` seeds the Newton iteration for the crossing-branch
    candidate (pass back ``ProxResult.p3`` from a previous call with the
    same ``x``).  A Newton run that exhausts ``cfg.max_iter`` is reported
    through ``converged=False`` with its best iterate.
    """
    pr = query.params
    init = float("nan") if warm_start is None else float(warm_start)
    p, cand, iters, conv, p3 = kernels.prox(query.x, query.t, pr.a, pr.b, query.c,
                                            query.lam, cfg.tol, cfg.max_iter,
                                            cfg.fixed_iter, init)
    if not math.isfinite(p):
        raise ArithmeticError(f"prox produced a non-finite result for {query}")
    return ProxResult(p, CANDIDATES[cand], int(iters), bool(conv), p3)


def prox_neg_value_many(x, t: float, c, lam, a, b, cfg: NewtonConfig = DEFAULT_NEWTON,
                        warm_start=None, out=None):
    """Componentwise prox over arrays.

    Returns ``(p_star, p3, max_newton_iterations, all_converged)``.  ``lam``
    may be a scalar or a per-component array.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    n = x.shape[0]
    c = np.ascontiguousarray(c, dtype=np.float64)
    lam = np.ascontiguousarray(np.broadcast_to(lam, (n,)), dtype=np.float64)
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if warm_start is None:
        warm = np.full(n, np.nan)
    else:
        warm = np.ascontiguousarray(warm_start, dtype=np.float64)
    p_out = np.empty(n) if out is None else out
    p3_out = np.empty(n)
    max_it, ok = kernels.prox_many(x, float(t), a, b, c, lam, cfg.tol, cfg.max_iter,
                                   cfg.fixed_iter, warm, p_out, p3_out)
    return p_out, p3_out, int(max_it), bool(ok)
