"""Per-call timing of the separable quadratic solve.

Points are drawn uniformly from ``[-4, 4]^n x [0, 0.5]``.  The timed loop
runs over preallocated chunks through the batch kernel, so the measurement
covers the prox/value arithmetic and nothing per point in Python.
"""

from __future__ import annotations

import os
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._backend import available_backends
from ._backend import kernels as default_kernels
from .hopf_solver import reference_potential
from .prox1d import DEFAULT_NEWTON, FIXED_NEWTON_STEPS

DEFAULT_POINTS = 102_400


@dataclass(frozen=True)
class BenchmarkRow:
    n: int
    points: int
    mean_ns: float
    median_ns: float
    mode: str
    backend: str
    newton_iterations: int


def sample_points(n: int, count: int, seed: int = 0):
    """Uniform points in ``[-4, 4]^n`` and times in ``[0, 0.5]``."""
    rng = np.random.default_rng(seed)
    X = np.ascontiguousarray(rng.uniform(-4.0, 4.0, size=(count, n)))
    T = np.ascontiguousarray(rng.uniform(0.0, 0.5, size=count))
    return X, T


def _resolve_backend(backend):
    if backend is None:
        return default_kernels
    if isinstance(backend, str):
        mods = available_backends()
        if backend not in mods:
            raise ValueError(f"backend {backend!r} is not available (have {sorted(mods)})")
        return mods[backend]
    return backend


def time_quadratic(n: int, count: int = DEFAULT_POINTS, mode: str = "tolerance", seed: int = 0,
                   backend=None, chunk: int = 1024, threads: int = 1) -> BenchmarkRow:
    """Mean and median nanoseconds per point for ``Phi = |x - 1|^2 / 2``."""
    if mode not in ("tolerance", "fixed"):
        raise ValueError("mode must be 'tolerance' or 'fixed'")
    if count < 1 or n < 1:
        raise ValueError("need n >= 1 and count >= 1")
    k = _resolve_backend(backend)
    a, b = reference_potential(n)
    y = np.ones(n)
    w = np.ones(n)
    fixed = FIXED_NEWTON_STEPS if mode == "fixed" else 0
    tol, max_iter = DEFAULT_NEWTON.tol, DEFAULT_NEWTON.max_iter
    X, T = sample_points(n, count, seed)
    out = np.empty(count)
    bounds = [(s, min(s + chunk, count)) for s in range(0, count, chunk)]

    def run(span):
        s, e = span
        t0 = time.perf_counter_ns()
        it = k.quadratic_batch(X[s:e], T[s:e], a, b, y, w, 0.0, tol, max_iter, fixed, out[s:e])
        return time.perf_counter_ns() - t0, it

    run(bounds[0])  # warm-up
    per_chunk = []
    total_it = 0
    threads = max(1, int(threads))
    wall0 = time.perf_counter_ns()
    if threads == 1:
        for span in bounds:
            dt, it = run(span)
            per_chunk.append(dt / (span[1] - span[0]))
            total_it += it
    else:
        with ThreadPoolExecutor(threads) as pool:
            for span, (dt, it) in zip(bounds, pool.map(run, bounds)):
                per_chunk.append(dt / (span[1] - span[0]))
                total_it += it
    wall = time.perf_counter_ns() - wall0
    if not np.all(np.isfinite(out)):
        raise ArithmeticError("benchmark produced non-finite values")
    return BenchmarkRow(n, count, wall / count, statistics.median(per_chunk), mode,
                        k.NAME, int(total_it))


def run_benchmark(ns=(4, 8, 12, 16), count: int = DEFAULT_POINTS, mode: str = "tolerance",
                  seed: int = 0, backend=None, threads: int | None = None) -> list:
    threads = threads or os.cpu_count() or 1
    return [time_quadratic(n, count, mode, seed, backend, threads=threads) for n in ns]


def format_table(rows) -> str:
    head = f"{'n':>4} {'points':>8} {'mean ns':>12} {'median ns':>12} {'mode':>10} {'backend':>9}"
    lines = [head]
    for r in rows:
        lines.append(f"{r.n:>4} {r.points:>8} {r.mean_ns:>12.1f} {r.median_ns:>12.1f} "
                     f"{r.mode:>10} {r.backend:>9}")
    return "\n".join(lines)
