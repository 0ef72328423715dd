"""Hierarchical resampling: per-node samples built level by level.

Instead of evaluating the whole structure function per realization, each
internal node v keeps its own sample H_v of size n_v.  An element of H_v is
built by picking one element uniformly (with replacement across elements)
from each child's sample and applying the node's elementary operator.  Leaf
"samples" are the data columns.  The estimate is the mean of the root
sample, so the root size n_k plays the role of r.

Two distinct root elements may reuse sample elements anywhere down the
cascade.  The shared-leaf pattern omega (the set of leaf arguments whose
data element is common to both) has distribution

    P^v{omega} = prod_{child i} [ (1/n_i) delta(i, omega)
                                 + (1 - 1/n_i) P^i{omega intersect I0_i} ]

where I0_i is the set of leaves under child i, delta(i, omega) = 1 iff
I0_i is contained in omega (same pick shares everything below), and a leaf
has P{empty} = 1 (two distinct data elements share nothing).  The variance
of the root mean then assembles exactly like the flat case with r = n_k and
the pattern weights P^k{omega}.

Every argument must have its own sample (blocks of size one); the cascade
draws children independently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._streams import BLOCK, Lane, block_ranges, substream
from .budget import check_budget
from .pairs import (MixedMoment, OmegaPair, PairRow, VarianceReport,
                    _generator_mixed_moment, _generator_moments,
                    conditional_mixed_moment)
from .resampling import EstimateResult, exhaustive_moments
from .samples import SampleSet
from .systems import SystemSpec, children_of, elementary_apply

__all__ = [
    "node_sizes", "default_node_sizes", "wave_estimate", "WavePropagation",
    "propagate_pair_probabilities", "hierarchical_variance",
]


def _require_singleton(samples: SampleSet):
    if not samples.singleton_blocks:
        raise ValueError(
            "hierarchical resampling needs one sample per argument "
            "(no shared blocks)")


def node_sizes(spec: SystemSpec, samples: SampleSet,
               intermediate: dict) -> dict[int, int]:
    """Full node-size map: leaf sizes from the data, internal from the caller.

    ``intermediate`` maps internal node ids (m+1 .. root) to their sample
    sizes n_v; every internal node must be covered.
    """
    _require_singleton(samples)
    sizes = {i: samples.sizes[i - 1] for i in range(1, spec.m + 1)}
    for nid in spec.node_ids:
        if nid <= spec.m:
            continue
        if nid not in intermediate:
            raise ValueError(f"no size given for internal node {nid}")
        n = int(intermediate[nid])
        if n < 1:
            raise ValueError(f"node {nid} size must be >= 1, got {n}")
        sizes[nid] = n
    return sizes


def default_node_sizes(spec: SystemSpec, samples: SampleSet) -> dict[int, int]:
    """Convenience map: every internal node inherits its children's minimum."""
    _require_singleton(samples)
    sizes = {i: samples.sizes[i - 1] for i in range(1, spec.m + 1)}
    by_obj = {id(n): nid for nid, n in spec.node_ids.items()}
    for nid in sorted(spec.node_ids):
        if nid <= spec.m:
            continue
        node = spec.node_ids[nid]
        kids = [by_obj[id(c)] for c in children_of(node)]
        sizes[nid] = min(sizes[c] for c in kids)
    return sizes


def wave_estimate(spec: SystemSpec, samples: SampleSet, sizes: dict,
                  seed: int, keep_values: bool = False) -> EstimateResult:
    """Run the cascade once and average the root sample.

    A node whose requested size equals the product of its children's sizes
    (all of them exhaustively built, as leaves are) enumerates every child
    combination once instead of sampling, so a tree sized to the full
    enumeration counts reproduces the exhaustive mean exactly.

    Parameters
    ----------
    sizes : dict
        Node id -> sample size for every node (see :func:`node_sizes`).
    seed : int
        Run seed; node v's picks are keyed by (seed, wave-lane, v, block).
    """
    _require_singleton(samples)
    if samples.m != spec.m:
        raise ValueError(
            f"system takes {spec.m} arguments but samples bind {samples.m}")
    store: dict[int, np.ndarray] = {
        i: samples.values_for_arg(i) for i in range(1, spec.m + 1)}
    exhaustive = {i: True for i in range(1, spec.m + 1)}
    for nid in sorted(spec.node_ids):
        if nid <= spec.m:
            continue
        node = spec.node_ids[nid]
        kids = spec.children_ids(nid)
        n_v = int(sizes[nid])
        counts = [len(store[c]) for c in kids]
        if all(exhaustive[c] for c in kids) and n_v == math.prod(counts):
            pos = np.arange(n_v)
            cols = []
            stride = 1
            for c, cnt in zip(reversed(kids), reversed(counts)):
                cols.append(store[c][(pos // stride) % cnt])
                stride *= cnt
            cols.reverse()
            out = np.asarray(elementary_apply(node, cols), dtype=float)
            exhaustive[nid] = True
            store[nid] = out
            continue
        exhaustive[nid] = False
        out = np.empty(n_v, dtype=float)
        for b, start, stop in block_ranges(n_v, BLOCK):
            rng = substream(seed, Lane.WAVE, nid, b)
            cols = []
            for c in kids:
                src = store[c]
                idx = rng.integers(0, len(src), size=stop - start)
                cols.append(src[idx])
            out[start:stop] = elementary_apply(node, cols)
        store[nid] = out
    root = store[spec.root_id]
    var = float(np.var(root, ddof=1)) if len(root) > 1 else 0.0
    return EstimateResult(estimate=float(root.mean()), realizations=len(root),
                          seed=seed, empirical_variance=var,
                          values=root if keep_values else None)


@dataclass(frozen=True)
class WavePropagation:
    """Per-node shared-leaf pattern distributions.

    ``tables[v]`` maps frozensets of leaf arguments to probabilities (the
    distribution of the pattern between two distinct elements of H_v);
    ``arm_counts[v]`` is 2^(number of children), the count of reuse
    combinations over the node's own arms.
    """

    tables: dict
    arm_counts: dict
    root_id: int

    @property
    def root_table(self) -> dict:
        return self.tables[self.root_id]

    def delta(self, node_leaves: frozenset, omega: frozenset) -> bool:
        """Same-pick indicator: reusing a child element shares all its leaves."""
        return node_leaves <= omega


def propagate_pair_probabilities(spec: SystemSpec, sizes: dict,
                                 budget: int | None = None) -> WavePropagation:
    """Bottom-up pattern distributions for every internal node.

    ``sizes`` must give n_i for every node that appears as a child (all but
    the root; extra entries are ignored).  Only patterns with positive
    probability are stored.
    """
    tables: dict[int, dict] = {}
    arm_counts: dict[int, int] = {}
    for i in range(1, spec.m + 1):
        tables[i] = {frozenset(): 1.0}
    for nid in sorted(spec.node_ids):
        if nid <= spec.m:
            continue
        kids = spec.children_ids(nid)
        arm_counts[nid] = 2 ** len(kids)
        combined = {frozenset(): 1.0}
        for c in kids:
            if c not in sizes:
                raise ValueError(f"no size given for node {c}")
            n_c = int(sizes[c])
            leaves_c = spec.leaf_deps[c]
            factor: dict[frozenset, float] = {}
            for s, p in tables[c].items():
                factor[s] = factor.get(s, 0.0) + (1.0 - 1.0 / n_c) * p
            factor[leaves_c] = factor.get(leaves_c, 0.0) + 1.0 / n_c
            nxt: dict[frozenset, float] = {}
            check_budget(len(combined) * len(factor),
                         "pattern propagation state space", budget)
            for s1, p1 in combined.items():
                for s2, p2 in factor.items():
                    key = s1 | s2
                    nxt[key] = nxt.get(key, 0.0) + p1 * p2
            combined = nxt
        tables[nid] = {s: p for s, p in combined.items() if p > 0.0}
    return WavePropagation(tables=tables, arm_counts=arm_counts,
                           root_id=spec.root_id)


def hierarchical_variance(spec: SystemSpec, source, sizes: dict, *,
                          seed: int = 0, mc_draws: int = 100_000,
                          budget: int | None = None) -> VarianceReport:
    """Exact variance of the cascade estimate (root-sample mean).

    ``source`` is a SampleSet (data-conditional) or a list of per-argument
    KnownDistribution (generator mode); ``sizes`` the full node-size map
    including the root.
    """
    root_id = spec.root_id
    if root_id not in sizes:
        raise ValueError("sizes must include the root node")
    r = int(sizes[root_id])
    prop = propagate_pair_probabilities(spec, sizes, budget)
    table = sorted(prop.root_table.items(),
                   key=lambda kv: (len(kv[0]), sorted(kv[0])))
    if isinstance(source, SampleSet):
        _require_singleton(source)
        ex = exhaustive_moments(spec, source, budget)
        mu, mu2, mu_se = ex.mu, ex.mu2, 0.0
        rows = []
        for s, p in table:
            mm = conditional_mixed_moment(spec, source, OmegaPair(s),
                                          budget=budget)
            rows.append(PairRow(OmegaPair(s), p, mm.value, mm.se))
        mode = "empirical"
    else:
        dists = list(source)
        if len(dists) != spec.m:
            raise ValueError(f"need one distribution per argument ({spec.m})")
        mu, mu2, mu_se = _generator_moments(spec, dists, seed, mc_draws, budget)
        rows = []
        for pi, (s, p) in enumerate(table):
            mm = _generator_mixed_moment(
                spec, dists, [{i: i for i in s}], seed + 1 + pi, mc_draws,
                budget)
            rows.append(PairRow(OmegaPair(s), p, mm.value, mm.se))
        mode = "generator"
    mu11 = sum(row.probability * row.moment for row in rows)
    variance = mu2 / r + (r - 1) / r * mu11 - mu * mu
    w = (r - 1) / r
    se = math.sqrt(
        sum((w * row.probability * row.moment_se) ** 2 for row in rows)
        + (2 * mu * mu_se) ** 2)
    return VarianceReport(variance=variance, variance_se=se, r=r, mu=mu,
                          mu2=mu2, mu11=mu11, mode=mode, rows=tuple(rows))
