"""Shared helpers for statistical assertions.

Monte Carlo comparisons in this suite state their tolerance as a multiple
of the standard error of the quantity being checked; these helpers supply
the standard errors that are not one-liners.
"""

from __future__ import annotations

import math

import numpy as np


def mean_se(values) -> float:
    """Standard error of the sample mean."""
    arr = np.asarray(values, dtype=float)
    return float(arr.std(ddof=1) / math.sqrt(arr.size))


def var_se(values) -> float:
    """Standard error of the sample variance (fourth-moment formula).

    For iid observations, Var(s^2) = (m4 - s^4 (N-3)/(N-1)) / N with m4 the
    central fourth moment; the square root of the plug-in version is a
    serviceable standard error for N in the thousands.
    """
    arr = np.asarray(values, dtype=float)
    n = arr.size
    centred = arr - arr.mean()
    m4 = float(np.mean(centred**4))
    s2 = float(arr.var(ddof=1))
    return math.sqrt(max(m4 - s2 * s2 * (n - 3) / (n - 1), 0.0) / n)


def combined_se(a_se: float, b_se: float) -> float:
    """Standard error of a difference of two independent estimates."""
    return math.sqrt(a_se * a_se + b_se * b_se)


def trace_wave_patterns(spec, sizes, passes, rng, chunk=100_000):
    """Index-tracking oracle for the cascade's shared-leaf pattern law.

    Simulates whole cascades while carrying, for every node sample element,
    the original data index each leaf argument resolved to.  Two distinct
    root elements are then compared leaf by leaf; the returned array counts
    each sharing pattern (bitmask over leaf arguments, bit i-1 for xi).
    This follows the process definition only -- none of the propagation
    code is involved.
    """
    m = spec.m
    counts = np.zeros(2**m, dtype=np.int64)
    done = 0
    while done < passes:
        p = min(chunk, passes - done)
        leafmap = {
            i: {i: np.broadcast_to(np.arange(sizes[i]), (p, sizes[i]))}
            for i in range(1, m + 1)}
        for nid in sorted(spec.node_ids):
            if nid <= m:
                continue
            n_v = sizes[nid]
            maps = {}
            for c in spec.children_ids(nid):
                picks = rng.integers(0, sizes[c], size=(p, n_v))
                for leaf, arr in leafmap[c].items():
                    maps[leaf] = np.take_along_axis(arr, picks, axis=1)
            leafmap[nid] = maps
        root = leafmap[spec.root_id]
        n_k = sizes[spec.root_id]
        q = rng.integers(0, n_k, size=p)
        q2 = (q + 1 + rng.integers(0, n_k - 1, size=p)) % n_k
        rows = np.arange(p)
        mask = np.zeros(p, dtype=np.int64)
        for leaf, arr in root.items():
            mask |= (arr[rows, q] == arr[rows, q2]).astype(np.int64) << (leaf - 1)
        counts += np.bincount(mask, minlength=2**m)
        done += p
    return counts


def pattern_probabilities(table, m):
    """Spread a pattern table (frozenset -> prob) over the 2^m bitmask grid."""
    probs = np.zeros(2**m)
    for pattern, p in table.items():
        probs[sum(1 << (i - 1) for i in pattern)] = p
    return probs
