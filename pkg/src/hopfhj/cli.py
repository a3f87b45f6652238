"""Command-line front end.

A run is described by one JSON document::

    {
      "problem": {"n": 10, "potential": "reference",
                  "cost": {"type": "quadratic", "center": 1.0},
                  "transform": {"P": [[...]], "u0": [...]}},
      "admm": {"lam": 1.0, "eps": 1e-8, "max_iter": 10000},
      "query": {"type": "grid", ...},
      "output": "out_dir",
      "seed": 0,
      "strict": true
    }

Query types: ``single_point``, ``grid``, ``trajectory``, ``benchmark`` and
``verify``.  Exit codes: 0 ok, 1 configuration error, 2 solver did not
converge (strict mode), 3 I/O error, 4 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import benchmark, verify
from .hopf_solver import (AdmmConfig, AffineTransform, ProblemSpec, optimal_trajectory,
                          reference_potential, solve)
from .initial_costs import cost_from_dict

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NONCONVERGED = 2
EXIT_IO = 3
EXIT_VERIFY = 4


class ConfigError(ValueError):
    pass


def fmt(v) -> str:
    """17 significant digits: exact round trip for binary64."""
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


@dataclass
class RunConfig:
    problem: ProblemSpec | None
    query: dict
    admm: AdmmConfig
    output: str | None = None
    seed: int = 0
    strict: bool = True
    threads: int = field(default_factory=lambda: os.cpu_count() or 1)


def _vector(v, n, name):
    arr = np.asarray(v, dtype=float)
    if arr.ndim == 0:
        arr = np.full(n, float(arr))
    if arr.shape != (n,):
        raise ConfigError(f"{name} must have length {n}")
    return arr


def parse_problem(d: dict) -> ProblemSpec:
    try:
        n = int(d["n"])
        if n < 1:
            raise ConfigError("n must be positive")
        pot = d.get("potential", "reference")
        if pot == "reference":
            a, b = reference_potential(n)
        else:
            a, b = _vector(pot["a"], n, "a"), _vector(pot["b"], n, "b")
        cost = cost_from_dict(d["cost"], n)
        tr = d.get("transform")
        transform = None
        if tr is not None:
            P = np.asarray(tr["P"], dtype=float)
            if P.ndim == 1:
                P = np.diag(P)
            transform = AffineTransform(P, _vector(tr.get("u0", 0.0), n, "u0"))
        return ProblemSpec(a, b, cost, transform)
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError, NotImplementedError) as exc:
        raise ConfigError(f"invalid problem: {exc}") from exc


QUERY_TYPES = ("single_point", "grid", "trajectory", "benchmark", "verify")


def parse_config(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    query = doc.get("query")
    if not isinstance(query, dict) or query.get("type") not in QUERY_TYPES:
        raise ConfigError(f"query.type must be one of {QUERY_TYPES}")
    needs_problem = query["type"] in ("single_point", "grid", "trajectory")
    problem = parse_problem(doc["problem"]) if needs_problem or "problem" in doc else None
    if needs_problem and problem is None:
        raise ConfigError("this query needs a problem")
    try:
        admm = AdmmConfig(**{k: v for k, v in doc.get("admm", {}).items()
                             if k in ("lam", "eps", "max_iter")})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid admm settings: {exc}") from exc
    _validate_query(query, problem)
    return RunConfig(problem, query, admm, doc.get("output"), int(doc.get("seed", 0)),
                     bool(doc.get("strict", True)))


def _validate_query(q, problem):
    kind = q["type"]
    n = problem.n if problem is not None else None
    try:
        if kind in ("single_point", "trajectory"):
            _vector(q["x"], n, "x")
            if not float(q["t"]) >= 0:
                raise ConfigError("t must be non-negative")
            if kind == "trajectory":
                if not float(q["t"]) > 0:
                    raise ConfigError("trajectory needs t > 0")
                if int(q.get("samples", 101)) < 2:
                    raise ConfigError("samples must be at least 2")
        elif kind == "grid":
            axes = q.get("axes", [0, 1])
            if len(axes) != 2 or len(set(axes)) != 2 or not all(0 <= i < n for i in axes):
                raise ConfigError("axes must name two distinct coordinates")
            counts = q.get("counts", [101, 101])
            if len(counts) != 2 or min(counts) < 2:
                raise ConfigError("grid counts must be at least 2")
            ranges = q.get("ranges", [[-4, 4], [-4, 4]])
            if len(ranges) != 2 or any(not lo < hi for lo, hi in ranges):
                raise ConfigError("ranges must be [lo, hi] pairs with lo < hi")
            _vector(q.get("base", 0.0), n, "base")
            times = q.get("times", [0.0])
            if not times or any(float(t) < 0 for t in times):
                raise ConfigError("times must be a non-empty list of non-negative values")
        elif kind == "benchmark":
            if int(q.get("points", benchmark.DEFAULT_POINTS)) < 1:
                raise ConfigError("point count must be at least 1")
            if q.get("mode", "tolerance") not in ("tolerance", "fixed"):
                raise ConfigError("mode must be 'tolerance' or 'fixed'")
            if not all(int(n_) >= 1 for n_ in q.get("n", [4, 8, 12, 16])):
                raise ConfigError("dimensions must be positive")
        elif kind == "verify":
            suite = q.get("suite", "all")
            if suite != "all" and suite not in verify.SUITES:
                raise ConfigError(f"unknown suite {suite!r}")
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"invalid query: {exc}") from exc


def _write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    text = buf.getvalue()
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)


class _Run:
    def __init__(self, cfg: RunConfig, quiet: bool):
        self.cfg = cfg
        self.quiet = quiet
        self.unconverged = 0

    def say(self, msg):
        if not self.quiet:
            print(msg)

    def solve(self, x, t):
        r = solve(x, t, self.cfg.problem, self.cfg.admm)
        if not r.converged:
            self.unconverged += 1
        return r

    def single_point(self, q):
        n = self.cfg.problem.n
        x, t = _vector(q["x"], n, "x"), float(q["t"])
        r = self.solve(x, t)
        self.say(f"value = {fmt(r.value)}")
        self.say("p_star = [" + ", ".join(fmt(v) for v in r.p_star) + "]")
        self.say(f"iterations = {r.iterations}  converged = {r.converged}"
                 + ("" if r.branch is None else f"  branch = {r.branch}"))
        if self.cfg.output:
            header = ["value", "iterations", "converged", "branch"] + [f"p{i + 1}" for i in range(n)]
            branch = -1 if r.branch is None else r.branch
            _write_csv(self.cfg.output, header,
                       [[r.value, r.iterations, r.converged, branch, *r.p_star]])
        return EXIT_OK

    def grid(self, q):
        spec = self.cfg.problem
        i, j = q.get("axes", [0, 1])
        (lo1, hi1), (lo2, hi2) = q.get("ranges", [[-4, 4], [-4, 4]])
        c1, c2 = q.get("counts", [101, 101])
        base = _vector(q.get("base", 0.0), spec.n, "base")
        times = [float(t) for t in q.get("times", [0.0])]
        g1, g2 = np.linspace(lo1, hi1, int(c1)), np.linspace(lo2, hi2, int(c2))
        minplus = hasattr(spec.cost, "branches")
        out_dir = Path(self.cfg.output or "grid_output")
        out_dir.mkdir(parents=True, exist_ok=True)
        header = [f"x{i + 1}", f"x{j + 1}", "t", "value"] + (["branch"] if minplus else [])

        def row_block(args):
            t, u = args
            rows = []
            for v in g2:
                x = base.copy()
                x[i], x[j] = u, v
                r = self.solve(x, t)
                rows.append([u, v, t, r.value] + ([r.branch] if minplus else []))
            return rows

        files = []
        with ThreadPoolExecutor(max(1, self.cfg.threads)) as pool:
            for k, t in enumerate(times):
                blocks = pool.map(row_block, [(t, u) for u in g1])
                rows = [r for blk in blocks for r in blk]
                path = out_dir / f"grid_t{k}.csv"
                _write_csv(path, header, rows)
                files.append(path)
        self.say(f"wrote {len(files)} grid file(s) to {out_dir}")
        return EXIT_OK

    def trajectory(self, q):
        spec = self.cfg.problem
        x, t = _vector(q["x"], spec.n, "x"), float(q["t"])
        r = self.solve(x, t)
        s = np.linspace(0.0, t, int(q.get("samples", 101)))
        tr = optimal_trajectory(x, t, r, spec, s)
        header = ["s"] + [f"gamma{i + 1}" for i in range(spec.n)]
        _write_csv(self.cfg.output, header, [[si, *row] for si, row in zip(tr.times, tr.states)])
        return EXIT_OK

    def benchmark(self, q):
        rows = benchmark.run_benchmark(tuple(int(n) for n in q.get("n", [4, 8, 12, 16])),
                                       int(q.get("points", benchmark.DEFAULT_POINTS)),
                                       q.get("mode", "tolerance"), self.cfg.seed,
                                       q.get("backend"), self.cfg.threads)
        self.say(benchmark.format_table(rows))
        if self.cfg.output:
            _write_csv(self.cfg.output, ["n", "points", "mean_ns", "median_ns", "mode", "backend"],
                       [[r.n, r.points, r.mean_ns, r.median_ns, r.mode, r.backend] for r in rows])
        return EXIT_OK

    def verify(self, q):
        checks = verify.run_suite(q.get("suite", "all"), self.cfg.seed)
        for c in checks:
            self.say(f"{'PASS' if c.passed else 'FAIL'}  {c.name}  ({c.detail})")
        if self.cfg.output:
            Path(self.cfg.output).parent.mkdir(parents=True, exist_ok=True)
            with open(self.cfg.output, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["check", "passed", "detail"])
                for c in checks:
                    w.writerow([c.name, int(c.passed), c.detail])
        return EXIT_OK if all(c.passed for c in checks) else EXIT_VERIFY


def run(cfg: RunConfig, quiet: bool = False) -> int:
    """Execute a parsed configuration and return the exit status."""
    job = _Run(cfg, quiet)
    status = getattr(job, cfg.query["type"])(cfg.query)
    if status == EXIT_OK and job.unconverged:
        msg = f"warning: {job.unconverged} solve(s) did not converge"
        print(msg, file=sys.stderr)
        if cfg.strict:
            return EXIT_NONCONVERGED
    return status


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hopfhj", description="Grid-free HJ solver with a "
                                 "piecewise-affine concave potential.")
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", help="output file (or directory for grid queries)")
    ap.add_argument("--threads", type=int, help="worker threads (default: logical cores)")
    ap.add_argument("--seed", type=int, help="seed for random point sets")
    ap.add_argument("--quiet", action="store_true", help="suppress progress output")
    ap.add_argument("--warn-only", action="store_true",
                    help="report non-convergence as a warning with exit status 0")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with open(args.config) as fh:
            doc = json.load(fh)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    except json.JSONDecodeError as exc:
        print(f"error: config is not valid JSON: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = parse_config(doc)
    except (ConfigError, KeyError, TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.out:
        cfg.output = args.out
    if args.seed is not None:
        cfg.seed = args.seed
    if args.threads is not None:
        if args.threads < 1:
            print("error: --threads must be at least 1", file=sys.stderr)
            return EXIT_CONFIG
        cfg.threads = args.threads
    if args.warn_only:
        cfg.strict = False
    try:
        return run(cfg, args.quiet)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
