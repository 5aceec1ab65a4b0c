"""Exact empirical Wasserstein-1 via optimal assignment.

The O(n^3) shortest-augmenting-path kernel has two interchangeable
backends: the compiled ralab._assign_c extension and the numpy fallback
ralab._assign_py. Selection happens at import; RALAB_PURE_PY=1 forces
the fallback. benchmarks/bench_w1.py compares the two.
"""

from __future__ import annotations

import math
import os

import numpy as np
from scipy.spatial.distance import cdist

MAX_BATCH = 2048


def _select_backend():
    if not os.environ.get("RALAB_PURE_PY"):
        try:
            from ralab._assign_c import solve_assignment as solve_c
            return "c", solve_c
        except ImportError:
            pass
    from ralab._assign_py import solve_assignment as solve_py
    return "python", solve_py


BACKEND_NAME, solve_assignment = _select_backend()


def assignment_cost(cost: np.ndarray) -> float:
    """Optimal assignment cost of a square matrix (fsum of chosen entries)."""
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    col4row = solve_assignment(cost)
    return math.fsum(cost[i, col4row[i]] for i in range(cost.shape[0]))


def w1_exact(batch_p: np.ndarray, batch_q: np.ndarray) -> float:
    """Optimal-coupling mean distance (1/n) min_pi sum |x_i - y_pi(i)|."""
    p = np.atleast_2d(np.asarray(batch_p, dtype=np.float64))
    q = np.atleast_2d(np.asarray(batch_q, dtype=np.float64))
    if p.shape != q.shape:
        raise ValueError(f"batch shapes differ: {p.shape} vs {q.shape}")
    n = p.shape[0]
    if n > MAX_BATCH:
        raise ValueError(f"batch size {n} exceeds cap {MAX_BATCH}")
    cost = cdist(p, q)
    return assignment_cost(cost) / n
