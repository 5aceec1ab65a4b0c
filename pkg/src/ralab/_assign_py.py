"""Pure-numpy fallback for the assignment kernel.

Same shortest-augmenting-path algorithm as the compiled ralab._assign_c,
with the per-row Dijkstra scan vectorized over remaining columns.
"""

from __future__ import annotations

import numpy as np


def solve_assignment(cost: np.ndarray) -> np.ndarray:
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    n = cost.shape[0]
    if cost.shape != (n, n):
        raise ValueError("cost matrix must be square")

    col4row = np.full(n, -1, dtype=np.intp)
    row4col = np.full(n, -1, dtype=np.intp)
    u = np.zeros(n)
    v = np.zeros(n)

    for cur_row in range(n):
        shortest = np.full(n, np.inf)
        path = np.full(n, -1, dtype=np.intp)
        remaining = np.arange(n - 1, -1, -1, dtype=np.intp)
        scanned_rows: list[int] = []
        scanned_cols: list[int] = []
        min_val = 0.0
        sink = -1
        i = cur_row
        while sink == -1:
            scanned_rows.append(i)
            r = min_val + cost[i, remaining] - u[i] - v[remaining]
            improved = r < shortest[remaining]
            upd = remaining[improved]
            shortest[upd] = r[improved]
            path[upd] = i

            vals = shortest[remaining]
            lowest = vals.min()
            ties = remaining[vals == lowest]
            free = ties[row4col[ties] == -1]
            j = int(free[0]) if free.size else int(ties[0])
            min_val = float(lowest)
            if row4col[j] == -1:
                sink = j
            else:
                i = int(row4col[j])
            scanned_cols.append(j)
            remaining = remaining[remaining != j]

        u[cur_row] += min_val
        for i_s in scanned_rows:
            if i_s != cur_row:
                u[i_s] += min_val - shortest[col4row[i_s]]
        sc = np.asarray(scanned_cols, dtype=np.intp)
        v[sc] -= min_val - shortest[sc]

        j = sink
        while True:
            i = int(path[j])
            row4col[j] = i
            col4row[i], j = j, col4row[i]
            if i == cur_row:
                break

    return col4row
