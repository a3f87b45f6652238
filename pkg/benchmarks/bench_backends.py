"""Compiled kernels against the pure-Python fallback on the quadratic benchmark.

    python3 benchmarks/bench_backends.py [--points N] [--n 4 8 12 16]
"""

import argparse

from hopfhj import benchmark
from hopfhj._backend import available_backends


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=4096)
    ap.add_argument("--n", type=int, nargs="+", default=[4, 8, 12, 16])
    ap.add_argument("--mode", choices=["tolerance", "fixed"], default="tolerance")
    args = ap.parse_args()
    mods = available_backends()
    rows = {name: [benchmark.time_quadratic(n, args.points, args.mode, backend=name) for n in args.n]
            for name in sorted(mods)}
    for name, rs in rows.items():
        print(f"[{name}]")
        print(benchmark.format_table(rs))
    if "compiled" in rows:
        print("\nspeed-up of compiled over python:")
        for rp, rc in zip(rows["python"], rows["compiled"]):
            print(f"  n={rp.n:>3}: {rp.mean_ns / rc.mean_ns:7.1f}x")
    else:
        print("\ncompiled extension not built; only the fallback was timed")


if __name__ == "__main__":
    main()
