"""Estimation when some argument distributions are known.

Arguments split into a resampled part X (data samples) and a known part Z
(distributions given in closed form).  Three estimators:

* :func:`estimate_known_g` -- the conditional expectation
  g(x) = E[phi(x, Z)] is available in closed form; resample X and average g.
* :func:`estimate_inner_mc` -- g is not available; for each X resample draw
  N fresh Z vectors and average phi over them (inner Monte Carlo).
* :func:`wave_estimate_vector_samples` -- hierarchical variant: node samples
  hold N-vectors, Z draws are refreshed elementwise at every level, and the
  estimate averages the root sample across both elements and vector slots.

By convention a system with known parts takes m + v arguments: positions
1..m bind to the data samples, positions m+1..m+v to the distributions in
order.

For the worked three-branch system
``ind(min(max(x1,x4), min(x2,x5), sum(x3,x6)) < t)`` (x4..x6 known),
:func:`three_branch_conditional` builds the exact g:

    g(x) = 1 - A * B * C,   A = 1 if x1 > t else P{Z1 > t},
                            B = 0 if x2 <= t else P{Z2 > t},
                            C = P{Z3 > t - x3}.

The system is below t unless every branch exceeds t; the branch terms are
the survival probabilities of max(x1,Z1), min(x2,Z2) and x3+Z3 at t.
"""

from __future__ import annotations

import numpy as np

from ._streams import BLOCK, Lane, block_ranges, substream
from .distributions import KnownDistribution
from .resampling import EstimateResult, draw_index_batch
from .samples import SampleSet
from .systems import (SystemSpec, children_of, elementary_apply, Input,
                      parse_system)

__all__ = [
    "estimate_known_g", "estimate_inner_mc", "wave_estimate_vector_samples",
    "three_branch_system", "three_branch_conditional",
]

_ROWS_CHUNK = 1 << 19


def estimate_known_g(g, samples: SampleSet, r: int, seed: int,
                     vectorized: bool = False,
                     keep_values: bool = False) -> EstimateResult:
    """Average a closed-form conditional expectation over X resamples.

    Parameters
    ----------
    g : callable
        Maps an argument vector (length m) to E[phi(x, Z)].  With
        ``vectorized=True`` it receives an (n, m) matrix and must return
        (n,) values.
    """
    if r < 1:
        raise ValueError(f"need r >= 1 realizations, got {r}")
    values = np.empty(r, dtype=float)
    for b, start, stop in block_ranges(r, BLOCK):
        rng = substream(seed, Lane.KNOWN_G, b)
        idx = draw_index_batch(samples, stop - start, rng)
        X = samples.values_matrix(idx)
        if vectorized:
            values[start:stop] = np.asarray(g(X), dtype=float)
        else:
            values[start:stop] = [float(g(row)) for row in X]
    var = float(np.var(values, ddof=1)) if r > 1 else 0.0
    return EstimateResult(estimate=float(values.mean()), realizations=r,
                          seed=seed, empirical_variance=var,
                          values=values if keep_values else None)


def _split_args(spec: SystemSpec, samples: SampleSet, z_dists):
    m = samples.m
    nu = len(z_dists)
    if spec.m != m + nu:
        raise ValueError(
            f"system takes {spec.m} arguments; samples bind {m} and "
            f"{nu} known distributions were given (need m + v = {spec.m})")
    return m, nu


def estimate_inner_mc(spec: SystemSpec, samples: SampleSet, z_dists,
                      N: int, r: int, seed: int,
                      keep_values: bool = False) -> EstimateResult:
    """Resample X; average phi over N fresh Z draws per realization.

    Realization q's value is (1/N) sum_i phi(X^q, Z^{q,i}); the estimate
    averages the r realizations.
    """
    z_dists = list(z_dists)
    m, nu = _split_args(spec, samples, z_dists)
    if N < 1 or r < 1:
        raise ValueError(f"need N >= 1 and r >= 1, got N={N}, r={r}")
    values = np.empty(r, dtype=float)
    rows_per = max(1, _ROWS_CHUNK // max(N, 1))
    for b, start, stop in block_ranges(r, BLOCK):
        rng = substream(seed, Lane.INNER_MC, b)
        idx = draw_index_batch(samples, stop - start, rng)
        X = samples.values_matrix(idx)
        for lo in range(0, stop - start, rows_per):
            hi = min(lo + rows_per, stop - start)
            rows = hi - lo
            full = np.empty((rows, N, m + nu), dtype=float)
            full[:, :, :m] = X[lo:hi, None, :]
            for z, d in enumerate(z_dists):
                full[:, :, m + z] = d.sample(rng, (rows, N))
            vals = _eval_rows(spec, full.reshape(rows * N, m + nu))
            values[start + lo:start + hi] = vals.reshape(rows, N).mean(axis=1)
    var = float(np.var(values, ddof=1)) if r > 1 else 0.0
    return EstimateResult(estimate=float(values.mean()), realizations=r,
                          seed=seed, empirical_variance=var,
                          values=values if keep_values else None)


def _eval_rows(spec: SystemSpec, rows: np.ndarray) -> np.ndarray:
    from .systems import evaluate_batch
    return evaluate_batch(spec, rows)


def wave_estimate_vector_samples(spec: SystemSpec, samples: SampleSet, z_dists,
                                 N: int, sizes: dict, seed: int,
                                 keep_values: bool = False) -> EstimateResult:
    """Hierarchical cascade whose node samples hold N-vectors.

    An element of an internal node's sample is an N-vector: slot i combines
    slot i of one picked element per child, with Z arguments redrawn fresh
    for every element and slot.  The estimate averages the root sample over
    elements and slots; ``empirical_variance`` is the spread of the
    per-element slot means.

    ``sizes`` maps internal node ids to n_v (root included).  Data-backed
    leaves use their sample sizes; Z leaves have no sample.
    """
    z_dists = list(z_dists)
    m, nu = _split_args(spec, samples, z_dists)
    if not samples.singleton_blocks:
        raise ValueError(
            "hierarchical resampling needs one sample per argument")
    if N < 1:
        raise ValueError(f"need N >= 1, got N={N}")
    store: dict[int, np.ndarray] = {}
    for nid in sorted(spec.node_ids):
        node = spec.node_ids[nid]
        if isinstance(node, Input):
            continue
        kids = spec.children_ids(nid)
        if nid not in sizes:
            raise ValueError(f"no size given for internal node {nid}")
        n_v = int(sizes[nid])
        if n_v < 1:
            raise ValueError(f"node {nid} size must be >= 1, got {n_v}")
        out = np.empty((n_v, N), dtype=float)
        for b, start, stop in block_ranges(n_v, BLOCK):
            rng = substream(seed, Lane.VECTOR_WAVE, nid, b)
            rows = stop - start
            cols = []
            for c in kids:
                child = spec.node_ids[c]
                if isinstance(child, Input):
                    if child.index <= m:
                        src = samples.values_for_arg(child.index)
                        idx = rng.integers(0, len(src), size=rows)
                        cols.append(np.broadcast_to(src[idx][:, None],
                                                    (rows, N)))
                    else:
                        d = z_dists[child.index - m - 1]
                        cols.append(d.sample(rng, (rows, N)))
                else:
                    src = store[c]
                    idx = rng.integers(0, len(src), size=rows)
                    cols.append(src[idx])
            out[start:stop] = elementary_apply(node, cols)
        store[nid] = out
    root = store[spec.root_id]
    per_element = root.mean(axis=1)
    var = float(np.var(per_element, ddof=1)) if len(per_element) > 1 else 0.0
    return EstimateResult(estimate=float(root.mean()),
                          realizations=root.shape[0], seed=seed,
                          empirical_variance=var,
                          values=per_element if keep_values else None)


# -- worked three-branch example ------------------------------------------

def three_branch_system(t: float) -> SystemSpec:
    """``ind(min(max(x1,x4), min(x2,x5), sum(x3,x6)) < t)``: x1..x3 data,
    x4..x6 known."""
    return parse_system("ind(min(max(x1,x4),min(x2,x5),sum(x3,x6)) < t)",
                        params={"t": t})


def three_branch_conditional(t: float, z_dists):
    """Exact conditional expectation of the three-branch indicator given x.

    ``z_dists`` are the distributions of x4, x5, x6.  Returns a vectorized
    callable usable with ``estimate_known_g(..., vectorized=True)``.
    """
    z1, z2, z3 = z_dists
    s1 = float(z1.sf(t))
    s2 = float(z2.sf(t))

    def g(X):
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        if single:
            X = X[None, :]
        a = np.where(X[:, 0] > t, 1.0, s1)
        b = np.where(X[:, 1] <= t, 0.0, s2)
        c = np.asarray(z3.sf(t - X[:, 2]), dtype=float)
        out = 1.0 - a * b * c
        return float(out[0]) if single else out

    return g
