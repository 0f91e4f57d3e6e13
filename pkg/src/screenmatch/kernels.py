"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

Selection happens once at import time: set ``SCREENMATCH_NUMBA=0`` in the
environment to force the numpy path (also used automatically when numba is
not importable).  ``benchmarks/bench_kernels.py`` times the two paths against
each other.
"""

import os

import numpy as np

_INF = 1e30


def _flag_enabled() -> bool:
    raw = os.environ.get("SCREENMATCH_NUMBA", "1").strip().lower()
    return raw not in ("0", "false", "no", "off")


# ---------------------------------------------------------------------------
# Assignment: min-cost perfect matching on a square cost matrix.
#
# Classic O(n^3) shortest-augmenting-path scheme with row/column potentials.
# Ties resolve toward the lowest column index, which makes the solver fully
# deterministic.  Loop-style body so numba can compile it as-is.
# ---------------------------------------------------------------------------

def _lap_loops(cost):
    n = cost.shape[0]
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    # p[j] = row matched to column j (0 = unmatched); column 0 is virtual
    p = np.zeros(n + 1, dtype=np.int64)
    way = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, _INF)
        used = np.zeros(n + 1, dtype=np.bool_)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = _INF
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0 != 0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    row_to_col = np.full(n, -1, dtype=np.int64)
    for j in range(1, n + 1):
        if p[j] > 0:
            row_to_col[p[j] - 1] = j - 1
    return row_to_col


def _lap_numpy(cost):
    n = cost.shape[0]
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.int64)
    way = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, _INF)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            cur = cost[i0 - 1, :] - u[i0] - v[1:]
            # freeze finalized columns: touching their minv/way here would
            # corrupt the parent pointers the augmentation walk follows
            better = ~used[1:] & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            masked = np.where(used[1:], _INF, minv[1:])
            j1 = int(np.argmin(masked)) + 1
            delta = masked[j1 - 1]
            u[p[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0 != 0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    row_to_col = np.full(n, -1, dtype=np.int64)
    for j in range(1, n + 1):
        if p[j] > 0:
            row_to_col[p[j] - 1] = j - 1
    return row_to_col


# ---------------------------------------------------------------------------
# Relative position bias: gather per-head axis tables into a (heads, T, T)
# logit bias, and the matching scatter-add for the backward pass.
# ---------------------------------------------------------------------------

def _rel_bias_fwd_loops(table_x, table_y, bx, by):
    n_heads = table_x.shape[0]
    t = bx.shape[0]
    out = np.empty((n_heads, t, t))
    for h in range(n_heads):
        for i in range(t):
            for j in range(t):
                out[h, i, j] = table_x[h, bx[i, j]] + table_y[h, by[i, j]]
    return out


def _rel_bias_fwd_numpy(table_x, table_y, bx, by):
    return table_x[:, bx] + table_y[:, by]


def _rel_bias_bwd_loops(grad, bx, by, n_buckets):
    n_heads = grad.shape[0]
    t = bx.shape[0]
    gx = np.zeros((n_heads, n_buckets))
    gy = np.zeros((n_heads, n_buckets))
    for h in range(n_heads):
        for i in range(t):
            for j in range(t):
                gx[h, bx[i, j]] += grad[h, i, j]
                gy[h, by[i, j]] += grad[h, i, j]
    return gx, gy


def _rel_bias_bwd_numpy(grad, bx, by, n_buckets):
    n_heads = grad.shape[0]
    gx = np.zeros((n_heads, n_buckets))
    gy = np.zeros((n_heads, n_buckets))
    for h in range(n_heads):
        np.add.at(gx[h], bx, grad[h])
        np.add.at(gy[h], by, grad[h])
    return gx, gy


# ---------------------------------------------------------------------------
# Path selection
# ---------------------------------------------------------------------------

NUMBA_ENABLED = False
_lap_jit = None
_rel_fwd_jit = None
_rel_bwd_jit = None

if _flag_enabled():
    try:
        from numba import njit

        _lap_jit = njit(cache=True)(_lap_loops)
        _rel_fwd_jit = njit(cache=True)(_rel_bias_fwd_loops)
        _rel_bwd_jit = njit(cache=True)(_rel_bias_bwd_loops)
        NUMBA_ENABLED = True
    except ImportError:
        NUMBA_ENABLED = False


def lap_min_cost(cost: np.ndarray) -> np.ndarray:
    """Solve min-cost perfect assignment on a square matrix.

    Returns row_to_col, the matched column of every row.
    """
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ValueError("cost matrix must be square")
    if cost.shape[0] == 0:
        return np.empty(0, dtype=np.int64)
    if NUMBA_ENABLED:
        return _lap_jit(cost)
    return _lap_numpy(cost)


def rel_bias_forward(table_x, table_y, bx, by):
    """Bias logits (heads, T, T) from per-axis bucket tables (heads, buckets)."""
    if NUMBA_ENABLED:
        return _rel_fwd_jit(table_x, table_y, np.ascontiguousarray(bx), np.ascontiguousarray(by))
    return _rel_bias_fwd_numpy(table_x, table_y, bx, by)


def rel_bias_backward(grad, bx, by, n_buckets):
    """Scatter-add bias gradients back into the per-axis tables."""
    if NUMBA_ENABLED:
        return _rel_bwd_jit(np.ascontiguousarray(grad), np.ascontiguousarray(bx),
                            np.ascontiguousarray(by), n_buckets)
    return _rel_bias_bwd_numpy(grad, bx, by, n_buckets)
