# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops. Keep signatures identical to ``_kernels_py``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def pareto_mask(const double[::1] x, const double[::1] y):
    """Non-dominated mask for minimisation of both ``x`` and ``y``."""
    cdef Py_ssize_t n = x.shape[0]
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] out = np.zeros(n, dtype=np.uint8)
    if n == 0:
        return out.astype(bool)
    cdef cnp.ndarray[cnp.intp_t, ndim=1] order = np.lexsort((np.asarray(y), np.asarray(x)))
    cdef Py_ssize_t i = 0, j, k
    cdef double best_prev = np.inf, gx, gmin, yk
    while i < n:
        gx = x[order[i]]
        gmin = y[order[i]]
        j = i
        while j < n and x[order[j]] == gx:
            j += 1
        for k in range(i, j):
            yk = y[order[k]]
            if yk == gmin and best_prev > yk:
                out[order[k]] = 1
        if gmin < best_prev:
            best_prev = gmin
        i = j
    return out.astype(bool)


def match_fifo(const cnp.int64_t[::1] keys_sorted, const cnp.uint8_t[::1] is_start_sorted):
    """FIFO start/end matching over events grouped by key (time order within a key).

    Returns (start_pos, end_pos, unmatched_starts) where positions index the
    grouped arrays.
    """
    cdef Py_ssize_t n = keys_sorted.shape[0]
    cdef cnp.ndarray[cnp.intp_t, ndim=1] queue = np.empty(n, dtype=np.intp)
    cdef cnp.ndarray[cnp.intp_t, ndim=1] s_out = np.empty(n, dtype=np.intp)
    cdef cnp.ndarray[cnp.intp_t, ndim=1] e_out = np.empty(n, dtype=np.intp)
    cdef Py_ssize_t i = 0, head = 0, tail = 0, m = 0, unmatched = 0
    cdef cnp.int64_t cur
    if n == 0:
        return s_out[:0], e_out[:0], 0
    cur = keys_sorted[0]
    for i in range(n):
        if keys_sorted[i] != cur:
            unmatched += tail - head
            head = 0
            tail = 0
            cur = keys_sorted[i]
        if is_start_sorted[i]:
            queue[tail] = i
            tail += 1
        elif tail > head:
            s_out[m] = queue[head]
            e_out[m] = i
            head += 1
            m += 1
    unmatched += tail - head
    return s_out[:m], e_out[:m], unmatched


def count_sign_reversals(const double[::1] angles, double deadband):
    """Sign changes among turning angles whose magnitude exceeds ``deadband``."""
    cdef Py_ssize_t i, n = angles.shape[0]
    cdef int last = 0, s
    cdef Py_ssize_t count = 0
    for i in range(n):
        if angles[i] > deadband:
            s = 1
        elif angles[i] < -deadband:
            s = -1
        else:
            continue
        if last != 0 and s != last:
            count += 1
        last = s
    return count
