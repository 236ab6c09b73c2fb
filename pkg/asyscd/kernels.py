"""Compiled inner loops.

All kernels release the GIL so worker threads run in parallel on a shared
iterate. A Hessian is passed as (indptr, indices, data, dense): in dense
layout row i occupies data[indptr[i]:indptr[i+1]] and its column index is the
offset within the row, so `indices` is unused.
"""
import numpy as np
from numba import njit


@njit(nogil=True, cache=True)
def row_dot(indptr, indices, data, dense, i, x):
    start = indptr[i]
    stop = indptr[i + 1]
    acc = 0.0
    if dense:
        for k in range(start, stop):
            acc += data[k] * x[k - start]
    else:
        for k in range(start, stop):
            acc += data[k] * x[indices[k]]
    return acc


@njit(nogil=True, cache=True)
def clamp(v, lo, hi):
    return min(max(v, lo), hi)


@njit(nogil=True, cache=True)
def gradient_rows(indptr, indices, data, dense, c, x, out, row_start, row_stop):
    for i in range(row_start, row_stop):
        out[i] = row_dot(indptr, indices, data, dense, i, x) + c[i]


@njit(nogil=True, cache=True)
def delayed_steps(indptr, indices, data, dense, c, lo, hi, scale, history, coords, lags, j_start, j_stop):
    """Algorithm steps j_start..j_stop-1 over a ring of the last tau+1 iterates"""
    slots = history.shape[0]
    for j in range(j_start, j_stop):
        i = coords[j]
        read = history[(j - lags[j]) % slots]
        g = row_dot(indptr, indices, data, dense, i, read) + c[i]
        current = history[j % slots]
        following = history[(j + 1) % slots]
        if slots > 1:
            following[:] = current
        following[i] = clamp(current[i] - scale * g, lo[i], hi[i])


@njit(nogil=True, cache=True)
def serial_steps(indptr, indices, data, dense, c, lo, hi, scale, x, coords, j_start, j_stop):
    for j in range(j_start, j_stop):
        i = coords[j]
        g = row_dot(indptr, indices, data, dense, i, x) + c[i]
        x[i] = clamp(x[i] - scale * g, lo[i], hi[i])


@njit(nogil=True, cache=True)
def sweep(indptr, indices, data, dense, c, lo, hi, scale, x, order, start, stop,
          counts, log_coords, log_values, log_pos):
    """Update x[order[start:stop]] in place against the live shared iterate"""
    for k in range(start, stop):
        i = order[k]
        g = row_dot(indptr, indices, data, dense, i, x) + c[i]
        v = clamp(x[i] - scale * g, lo[i], hi[i])
        x[i] = v
        if counts.size > 0:
            counts[i] += 1
        if log_coords.size > 0:
            p = log_pos[0]
            if p < log_coords.size:
                log_coords[p] = i
                log_values[p] = v
                log_pos[0] = p + 1


NO_COUNTS = np.empty(0, dtype=np.int64)
NO_LOG_COORDS = np.empty(0, dtype=np.int64)
NO_LOG_VALUES = np.empty(0, dtype=np.float64)
NO_LOG_POS = np.zeros(1, dtype=np.int64)
