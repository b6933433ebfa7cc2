"""Numba kernels for the per-event hot loops.

Kept free of RNG and Python objects: plain int64/float64 arrays in,
arrays out, so results are reproducible and the functions cache cleanly.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def prune_dead_time(times: np.ndarray, min_sep: np.int64) -> np.ndarray:
    """Keep-mask for a sorted int64 timestamp array: an event closer than
    ``min_sep`` ticks after the last accepted event is dropped."""
    n = times.size
    keep = np.zeros(n, dtype=np.bool_)
    if n == 0:
        return keep
    keep[0] = True
    last = times[0]
    for i in range(1, n):
        if times[i] - last >= min_sep:
            keep[i] = True
            last = times[i]
    return keep


@njit(cache=True)
def pair_sweep(t1: np.ndarray, t2: np.ndarray, origin: np.int64,
               bin_width: np.int64, n_bins: np.int64):
    """All-pairs delay histogram by a sorted two-pointer sweep.

    For every pair (a in t1, b in t2) with ``origin <= b - a <
    origin + n_bins*bin_width`` the bin of ``b - a`` is incremented.
    Returns (counts, in-range pair count, comparison count); the last is
    the loop-work counter used by the cost-scaling assertion.
    """
    counts = np.zeros(n_bins, dtype=np.int64)
    n1, n2 = t1.size, t2.size
    span_lo = origin
    span_hi = origin + n_bins * bin_width
    pairs = np.int64(0)
    ops = np.int64(0)
    lo = 0
    hi = 0
    for i in range(n1):
        a = t1[i]
        while lo < n2 and t2[lo] - a < span_lo:
            lo += 1
            ops += 1
        if hi < lo:
            hi = lo
        while hi < n2 and t2[hi] - a < span_hi:
            hi += 1
            ops += 1
        for j in range(lo, hi):
            tau = t2[j] - a
            counts[(tau - origin) // bin_width] += 1
            ops += 1
        pairs += hi - lo
        ops += 1
    return counts, pairs, ops
