"""Row-interval sweep shared by every rectangular distance.

Given row prefix sums W (shape (nx + 1, ny), W[0] = 0), the sweep returns

    max over x1 < x2 of  max_y D(y) - min_y D(y),   D = W[x2] - W[x1]

together with the maximising rows and columns.  This is the exact
objective for interval rectangles: for a fixed row interval the best
column interval runs between the arg-min and arg-max of the column
profile.  Ties are broken towards the lexicographically smallest
(x1, x2, y_lo, y_hi) so results never depend on evaluation order.
"""
from __future__ import annotations

import os

import numpy as np
from numba import config, njit, prange

# The bundled TBB is too old for numba; OpenMP avoids a warning on import.
if "NUMBA_THREADING_LAYER" not in os.environ:
    config.THREADING_LAYER = "omp"

TILE = 16


@njit(cache=True, parallel=True, fastmath=True)
def _tiled(W):
    nx = W.shape[0] - 1
    ny = W.shape[1]
    ntiles = (nx + TILE - 1) // TILE
    best = np.empty(ntiles, dtype=W.dtype)
    bx1 = np.zeros(ntiles, dtype=np.int64)
    bx2 = np.zeros(ntiles, dtype=np.int64)
    for t in prange(ntiles):
        lo_row = t * TILE
        hi_row = min(lo_row + TILE, nx)
        tb = W[0, 0] - W[0, 0] - 1
        t1 = 0
        t2 = 0
        for x2 in range(lo_row + 1, nx + 1):
            row2 = W[x2]
            for x1 in range(lo_row, min(hi_row, x2)):
                row1 = W[x1]
                hi = row2[0] - row1[0]
                lo = hi
                for y in range(1, ny):
                    d = row2[y] - row1[y]
                    hi = max(hi, d)
                    lo = min(lo, d)
                v = hi - lo
                if v > tb or (v == tb and (x1 < t1 or (x1 == t1 and x2 < t2))):
                    tb = v
                    t1 = x1
                    t2 = x2
        best[t] = tb
        bx1[t] = t1
        bx2[t] = t2
    return best, bx1, bx2


def _columns(diff) -> tuple[int, int]:
    y_max = int(np.argmax(diff))
    y_min = int(np.argmin(diff))
    return min(y_max, y_min), max(y_max, y_min)


def sweep(W: np.ndarray) -> tuple[object, int, int, int, int]:
    """(best, x1, x2, y_lo, y_hi) for prefix-summed rows ``W``."""
    nx = W.shape[0] - 1
    if nx < 1 or W.shape[1] < 1:
        return 0, 0, 0, 0, 0
    if W.dtype == object:
        return _sweep_python(W)
    best, b1, b2 = _tiled(np.ascontiguousarray(W))
    idx = 0
    for t in range(1, len(best)):
        if best[t] > best[idx] or (best[t] == best[idx] and (b1[t], b2[t]) < (b1[idx], b2[idx])):
            idx = t
    x1, x2 = int(b1[idx]), int(b2[idx])
    y_lo, y_hi = _columns(W[x2] - W[x1])
    value = best[idx]
    return (int(value) if np.issubdtype(W.dtype, np.integer) else float(value)), x1, x2, y_lo, y_hi


def _sweep_python(W: np.ndarray):
    # arbitrary-precision integers: same objective, numpy object arithmetic
    nx = W.shape[0] - 1
    best, bx1, bx2 = -1, 0, 0
    for x1 in range(nx):
        D = W[x1 + 1:] - W[x1]
        vals = D.max(axis=1) - D.min(axis=1)
        j = max(range(len(vals)), key=lambda i: (vals[i], -i))
        if vals[j] > best:
            best, bx1, bx2 = vals[j], x1, x1 + 1 + j
    y_lo, y_hi = _columns(W[bx2] - W[bx1])
    return int(best), bx1, bx2, y_lo, y_hi


def set_threads(count: int | None) -> int:
    """Cap the sweep's worker threads; returns the count in effect."""
    import numba

    if count is not None:
        numba.set_num_threads(max(1, min(int(count), numba.config.NUMBA_NUM_THREADS)))
    return numba.get_num_threads()
