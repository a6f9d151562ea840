"""Pure-Python twins of the compiled kernels in ``_kernels.pyx``."""

from __future__ import annotations

import numpy as np


def pareto_mask(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    n = len(x)
    out = np.zeros(n, dtype=bool)
    if n == 0:
        return out
    order = np.lexsort((y, x))
    xs = x[order].tolist()
    ys = y[order].tolist()
    best_prev = float("inf")
    i = 0
    while i < n:
        gx, gmin = xs[i], ys[i]
        j = i
        while j < n and xs[j] == gx:
            j += 1
        for k in range(i, j):
            if ys[k] == gmin and best_prev > ys[k]:
                out[order[k]] = True
        best_prev = min(best_prev, gmin)
        i = j
    return out


def match_fifo(keys_sorted: np.ndarray, is_start_sorted: np.ndarray):
    starts: list[int] = []
    ends: list[int] = []
    unmatched = 0
    queue: list[int] = []
    head = 0
    cur = None
    for i, (key, st) in enumerate(zip(keys_sorted.tolist(), is_start_sorted.tolist())):
        if key != cur:
            unmatched += len(queue) - head
            queue, head, cur = [], 0, key
        if st:
            queue.append(i)
        elif head < len(queue):
            starts.append(queue[head])
            ends.append(i)
            head += 1
    unmatched += len(queue) - head
    return np.asarray(starts, dtype=np.intp), np.asarray(ends, dtype=np.intp), unmatched


def count_sign_reversals(angles: np.ndarray, deadband: float) -> int:
    last = 0
    count = 0
    for a in angles.tolist():
        if a > deadband:
            s = 1
        elif a < -deadband:
            s = -1
        else:
            continue
        if last and s != last:
            count += 1
        last = s
    return count
