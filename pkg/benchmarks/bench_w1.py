"""Benchmark the assignment-kernel backends (compiled vs pure numpy).

Run:  python3 benchmarks/bench_w1.py [--sizes 128,256,512,1024,2048]
"""

import argparse
import math
import time

import numpy as np
from scipy.spatial.distance import cdist

from ralab import _assign_py
from ralab._rng import rng_from

try:
    from ralab._assign_c import solve_assignment as solve_c
except ImportError:
    solve_c = None


def run_once(solver, cost):
    t0 = time.perf_counter()
    perm = solver(cost)
    elapsed = time.perf_counter() - t0
    total = math.fsum(cost[i, perm[i]] for i in range(cost.shape[0]))
    return elapsed, total


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--sizes", default="128,256,512,1024,2048")
    parser.add_argument("--dim", type=int, default=6)
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    rng = rng_from(0)
    print(f"{'n':>6} {'numpy (s)':>12} {'cython (s)':>12} {'speedup':>9}  match")
    for n in sizes:
        p = rng.standard_normal((n, args.dim))
        q = rng.standard_normal((n, args.dim)) + 0.25
        cost = cdist(p, q)
        t_py, c_py = run_once(_assign_py.solve_assignment, cost)
        if solve_c is None:
            print(f"{n:>6} {t_py:>12.4f} {'n/a':>12}")
            continue
        t_c, c_c = run_once(solve_c, cost)
        ok = "yes" if abs(c_py - c_c) < 1e-8 * max(1.0, abs(c_py)) else "NO"
        print(f"{n:>6} {t_py:>12.4f} {t_c:>12.4f} {t_py / t_c:>8.1f}x  {ok}")


if __name__ == "__main__":
    main()
