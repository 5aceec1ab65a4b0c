# cython: boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Exact square assignment by shortest augmenting paths (JV-style).

Dijkstra-with-duals over the cost matrix; O(n^3), exact optimum for
arbitrary finite real costs. This is the compiled hot kernel behind
w1_exact; ralab._assign_py holds the equivalent numpy fallback.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def solve_assignment(double[:, ::1] cost):
    """Return col4row: column assigned to each row of a square cost matrix."""
    cdef Py_ssize_t n = cost.shape[0]
    if cost.shape[1] != n:
        raise ValueError("cost matrix must be square")

    cdef cnp.ndarray[cnp.intp_t, ndim=1] col4row_arr = np.full(n, -1, dtype=np.intp)
    cdef cnp.ndarray[cnp.intp_t, ndim=1] row4col_arr = np.full(n, -1, dtype=np.intp)
    cdef cnp.intp_t[::1] col4row = col4row_arr
    cdef cnp.intp_t[::1] row4col = row4col_arr

    cdef double[::1] u = np.zeros(n)
    cdef double[::1] v = np.zeros(n)
    cdef double[::1] shortest = np.empty(n)
    cdef cnp.intp_t[::1] path = np.empty(n, dtype=np.intp)
    cdef cnp.intp_t[::1] remaining = np.empty(n, dtype=np.intp)
    cdef cnp.uint8_t[::1] scanned_rows = np.empty(n, dtype=np.uint8)
    cdef cnp.uint8_t[::1] scanned_cols = np.empty(n, dtype=np.uint8)

    cdef Py_ssize_t cur_row, i, j, it, index, num_remaining, sink
    cdef double min_val, lowest, r
    cdef double inf = np.inf

    for cur_row in range(n):
        for j in range(n):
            shortest[j] = inf
            path[j] = -1
            remaining[j] = n - j - 1
            scanned_rows[j] = 0
            scanned_cols[j] = 0
        num_remaining = n
        min_val = 0.0
        sink = -1
        i = cur_row
        while sink == -1:
            scanned_rows[i] = 1
            index = -1
            lowest = inf
            for it in range(num_remaining):
                j = remaining[it]
                r = min_val + cost[i, j] - u[i] - v[j]
                if r < shortest[j]:
                    shortest[j] = r
                    path[j] = i
                if shortest[j] < lowest or (shortest[j] == lowest
                                            and row4col[j] == -1):
                    lowest = shortest[j]
                    index = it
            min_val = lowest
            j = remaining[index]
            if row4col[j] == -1:
                sink = j
            else:
                i = row4col[j]
            scanned_cols[j] = 1
            num_remaining -= 1
            remaining[index] = remaining[num_remaining]

        u[cur_row] += min_val
        for i in range(n):
            if scanned_rows[i] and i != cur_row:
                u[i] += min_val - shortest[col4row[i]]
        for j in range(n):
            if scanned_cols[j]:
                v[j] -= min_val - shortest[j]

        j = sink
        while True:
            i = path[j]
            row4col[j] = i
            col4row[i], j = j, col4row[i]
            if i == cur_row:
                break

    return col4row_arr
