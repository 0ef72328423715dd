"""Exact variance of the resampling estimate via coincidence-pattern calculus.

Two realizations of the estimate may reuse the same sample elements; the
estimator variance over r realizations is

    Var = (1/r) mu2 + ((r-1)/r) mu11 - mu^2

where mu11 is the mixed moment E[phi phi'] of two realizations, decomposed
over coincidence patterns: mu11 = sum_pattern P{pattern} mu11(pattern).

Three pattern families describe which elements coincide:

* ``OmegaPair`` -- for layouts where every argument has its own sample: the
  set of argument positions that drew the same element twice.
* ``BetaPair`` -- general layouts: entry i holds the argument position of the
  second realization that reuses argument i's element (0 if not reused).
* ``AlphaPair`` -- per-block counts of shared elements (the beta pattern with
  the matching forgotten); probabilities are products of hypergeometric pmfs.

Mixed moments come in two modes.  *Empirical* mode conditions on the data:
mu11(pattern) averages phi(v) phi(v') over all ordered admissible
index-vector pairs showing exactly that pattern.  *Generator* mode treats
sample elements as draws from known distributions: coinciding positions
share one random value, all others are independent; moments are computed
exactly for finite-support distributions and by Monte Carlo otherwise.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ._streams import BLOCK, Lane, block_ranges, substream
from .budget import check_budget
from .distributions import KnownDistribution
from .resampling import exhaustive_moments
from .samples import BlockLayout, SampleSet
from .systems import SystemSpec, evaluate_batch

__all__ = [
    "OmegaPair", "BetaPair", "AlphaPair", "MixedMoment", "PairRow",
    "VarianceReport", "as_layout", "omega_probability", "alpha_probability",
    "beta_probability", "pair_probability", "enumerate_pairs",
    "omega_from_indices", "beta_from_indices", "alpha_from_indices",
    "conditional_mixed_moment", "resampling_variance",
]

_EVAL_CHUNK = 100_000


# -- pattern types --------------------------------------------------------

@dataclass(frozen=True)
class OmegaPair:
    """Argument positions where both realizations drew the same element."""

    args: frozenset

    def __init__(self, args=()):
        object.__setattr__(self, "args", frozenset(int(a) for a in args))

    def __repr__(self):
        inner = ",".join(str(a) for a in sorted(self.args))
        return f"omega{{{inner}}}"


@dataclass(frozen=True)
class BetaPair:
    """Per-argument reuse map: beta[i-1] = v > 0 when argument i's element
    reappears as argument v of the second realization, else 0."""

    beta: tuple[int, ...]

    def __init__(self, beta):
        object.__setattr__(self, "beta", tuple(int(v) for v in beta))

    def __repr__(self):
        return f"beta{self.beta}"


@dataclass(frozen=True)
class AlphaPair:
    """Shared-element counts per block (blocks ordered by first argument)."""

    counts: tuple[int, ...]

    def __init__(self, counts):
        object.__setattr__(self, "counts", tuple(int(c) for c in counts))

    def __repr__(self):
        return f"alpha{self.counts}"


def as_layout(obj) -> BlockLayout:
    """Coerce a SampleSet, BlockLayout or size sequence to a BlockLayout."""
    if isinstance(obj, BlockLayout):
        return obj
    if isinstance(obj, SampleSet):
        return obj.layout
    return BlockLayout.singleton(tuple(obj))


# -- probabilities --------------------------------------------------------

def _hyper_pmf(a: int, n: int, m: int) -> float:
    """P{a shared elements between two ordered m-of-n draws}; exact rational."""
    if a < 0 or a > m or m - a > n - m:
        return 0.0
    num = math.comb(m, a) * math.comb(n - m, m - a)
    return float(Fraction(num, math.comb(n, m)))


def omega_probability(omega, sizes) -> float:
    """P{omega} for a layout with one argument per sample.

    Equals prod_{i in omega} 1/n_i * prod_{i not in omega} (1 - 1/n_i).
    """
    if isinstance(omega, OmegaPair):
        omega = omega.args
    omega = frozenset(int(a) for a in omega)
    sizes = tuple(int(n) for n in sizes)
    m = len(sizes)
    if not omega <= set(range(1, m + 1)):
        raise ValueError(f"omega {sorted(omega)} not within arguments 1..{m}")
    p = 1.0
    for i, n in enumerate(sizes, start=1):
        p *= (1.0 / n) if i in omega else (1.0 - 1.0 / n)
    return p


def alpha_probability(alpha, layout) -> float:
    """P{alpha}: product over blocks of hypergeometric overlap pmfs."""
    layout = as_layout(layout)
    counts = alpha.counts if isinstance(alpha, AlphaPair) else tuple(alpha)
    if len(counts) != len(layout.block_args):
        raise ValueError(
            f"alpha has {len(counts)} entries for {len(layout.block_args)} blocks")
    p = 1.0
    for a, args, n in zip(counts, layout.block_args, layout.block_sizes):
        p *= _hyper_pmf(int(a), n, len(args))
    return p


def _beta_fragments(beta: BetaPair, layout: BlockLayout) -> list[dict]:
    """Split a beta map into per-block fragments, validating it."""
    if len(beta.beta) != layout.m:
        raise ValueError(f"beta has {len(beta.beta)} entries for m={layout.m}")
    frags = []
    for args in layout.block_args:
        frag = {}
        for i in args:
            v = beta.beta[i - 1]
            if v:
                if v not in args:
                    raise ValueError(
                        f"beta maps argument {i} to {v}, outside its block {args}")
                frag[i] = v
        if len(set(frag.values())) != len(frag):
            raise ValueError(f"beta not injective within block {args}")
        frags.append(frag)
    return frags


def beta_probability(beta, layout) -> float:
    """P{beta}: the alpha probability split evenly over the matchings.

    Given the per-block overlap counts, every assignment of which positions
    carry the shared elements and how they match is equally likely, so
    P{beta} = P{alpha(beta)} / prod_i [ C(m_i, a_i)^2 a_i! ].
    """
    layout = as_layout(layout)
    if not isinstance(beta, BetaPair):
        beta = BetaPair(beta)
    frags = _beta_fragments(beta, layout)
    p = 1.0
    for frag, args, n in zip(frags, layout.block_args, layout.block_sizes):
        m = len(args)
        a = len(frag)
        block_p = _hyper_pmf(a, n, m)
        if block_p == 0.0:
            return 0.0
        p *= block_p / (math.comb(m, a) ** 2 * math.factorial(a))
    return p


def pair_probability(pair, layout) -> float:
    layout = as_layout(layout)
    if isinstance(pair, OmegaPair):
        if not layout.singleton_blocks:
            raise ValueError("omega patterns require one argument per block")
        return omega_probability(pair, layout.sizes)
    if isinstance(pair, BetaPair):
        return beta_probability(pair, layout)
    if isinstance(pair, AlphaPair):
        return alpha_probability(pair, layout)
    raise TypeError(f"not a pair pattern: {pair!r}")


# -- enumeration ----------------------------------------------------------

def _block_beta_fragments(args: tuple[int, ...]):
    """All reuse fragments for one block, as (frag dict, match count)."""
    out = []
    for k in range(len(args) + 1):
        for sources in itertools.combinations(args, k):
            for targets in itertools.permutations(args, k):
                out.append((dict(zip(sources, targets)), k))
    return out


def enumerate_pairs(layout, family: str = "auto", budget: int | None = None):
    """All positive-probability patterns with probabilities; sums to 1.

    Parameters
    ----------
    layout : SampleSet, BlockLayout or size sequence
    family : {"auto", "omega", "alpha", "beta"}
        ``auto`` picks omega for singleton-block layouts, alpha otherwise.

    Returns
    -------
    list of (pattern, probability)
    """
    layout = as_layout(layout)
    if family == "auto":
        family = "omega" if layout.singleton_blocks else "alpha"
    if family == "omega":
        if not layout.singleton_blocks:
            raise ValueError("omega patterns require one argument per block")
        m = layout.m
        check_budget(2 ** m, "omega pattern enumeration", budget)
        sizes = layout.sizes
        out = []
        for mask in range(2 ** m):
            omega = OmegaPair(i + 1 for i in range(m) if mask >> i & 1)
            out.append((omega, omega_probability(omega, sizes)))
        return out
    if family == "alpha":
        ranges = []
        for args, n in zip(layout.block_args, layout.block_sizes):
            m_i = len(args)
            ranges.append(range(max(0, 2 * m_i - n), m_i + 1))
        total = math.prod(len(r) for r in ranges)
        check_budget(total, "alpha pattern enumeration", budget)
        out = []
        for counts in itertools.product(*ranges):
            alpha = AlphaPair(counts)
            out.append((alpha, alpha_probability(alpha, layout)))
        return out
    if family == "beta":
        per_block = []
        for args, n in zip(layout.block_args, layout.block_sizes):
            m_i = len(args)
            frags = [(f, k) for f, k in _block_beta_fragments(args)
                     if _hyper_pmf(k, n, m_i) > 0.0]
            per_block.append(frags)
        total = math.prod(len(f) for f in per_block)
        check_budget(total, "beta pattern enumeration", budget)
        out = []
        for combo in itertools.product(*per_block):
            beta = [0] * layout.m
            for frag, _ in combo:
                for i, v in frag.items():
                    beta[i - 1] = v
            beta = BetaPair(beta)
            out.append((beta, beta_probability(beta, layout)))
        return out
    raise ValueError(f"unknown pattern family {family!r}")


# -- classification of index-vector pairs ---------------------------------

def _indices_of(j):
    if hasattr(j, "indices"):
        j = j.indices
    return tuple(int(x) for x in j)


def omega_from_indices(jq, jq2) -> OmegaPair:
    """Positions where the two index vectors agree (singleton-block reading)."""
    a = _indices_of(jq)
    b = _indices_of(jq2)
    if len(a) != len(b):
        raise ValueError("index vectors of different lengths")
    return OmegaPair(i + 1 for i, (x, y) in enumerate(zip(a, b)) if x == y)


def beta_from_indices(jq, jq2, layout) -> BetaPair:
    """Reuse map between two admissible index vectors."""
    layout = as_layout(layout)
    a = _indices_of(jq)
    b = _indices_of(jq2)
    if len(a) != layout.m or len(b) != layout.m:
        raise ValueError(f"index vectors must have length m={layout.m}")
    beta = [0] * layout.m
    for args in layout.block_args:
        where = {b[v - 1]: v for v in args}
        for i in args:
            beta[i - 1] = where.get(a[i - 1], 0)
    return BetaPair(beta)


def alpha_from_indices(jq, jq2, layout) -> AlphaPair:
    """Per-block shared-element counts between two index vectors."""
    layout = as_layout(layout)
    a = _indices_of(jq)
    b = _indices_of(jq2)
    counts = []
    for args in layout.block_args:
        counts.append(len({a[i - 1] for i in args} & {b[v - 1] for v in args}))
    return AlphaPair(counts)


# -- mixed moments --------------------------------------------------------

@dataclass(frozen=True)
class MixedMoment:
    """E[phi phi'] under a coincidence pattern.

    ``se`` is 0 for exact routes; ``method`` records which route ran.
    """

    value: float
    se: float
    method: str


def _block_targets(pair, layout: BlockLayout):
    """Per-block match condition: ("frag", dict) or ("count", k)."""
    if isinstance(pair, OmegaPair):
        if not layout.singleton_blocks:
            raise ValueError("omega patterns require one argument per block")
        if not pair.args <= set(range(1, layout.m + 1)):
            raise ValueError(f"{pair!r} not within arguments 1..{layout.m}")
        out = []
        for args in layout.block_args:
            a = args[0]
            out.append(("frag", {a: a} if a in pair.args else {}))
        return out
    if isinstance(pair, BetaPair):
        return [("frag", frag) for frag in _beta_fragments(pair, layout)]
    if isinstance(pair, AlphaPair):
        if len(pair.counts) != len(layout.block_args):
            raise ValueError(
                f"{pair!r} has {len(pair.counts)} entries for "
                f"{len(layout.block_args)} blocks")
        return [("count", k) for k in pair.counts]
    raise TypeError(f"not a pair pattern: {pair!r}")


def _matching_of(pair, layout: BlockLayout) -> list[dict]:
    """Matchings i -> v consistent with the pattern (one for omega/beta)."""
    targets = _block_targets(pair, layout)
    per_block = []
    for (kind, tgt), args in zip(targets, layout.block_args):
        if kind == "frag":
            per_block.append([tgt])
        else:
            per_block.append([f for f, k in _block_beta_fragments(args)
                              if k == tgt])
    out = []
    for combo in itertools.product(*per_block):
        merged = {}
        for frag in combo:
            merged.update(frag)
        out.append(merged)
    return out


def conditional_mixed_moment(spec: SystemSpec, source, pair, *,
                             layout=None, seed: int = 0,
                             mc_draws: int = 100_000,
                             budget: int | None = None) -> MixedMoment:
    """Mixed moment E[phi phi'] of two realizations under a given pattern.

    Parameters
    ----------
    spec : SystemSpec
    source : SampleSet or sequence of KnownDistribution
        A SampleSet runs the data-conditional (empirical) route; a list of
        per-argument distributions runs the generator route.
    pair : OmegaPair, BetaPair or AlphaPair
    layout : optional
        Block structure; only needed for alpha patterns in generator mode
        (omega/beta carry their own matching).
    seed, mc_draws : int
        Only used when the generator route falls back to Monte Carlo.
    """
    if isinstance(source, SampleSet):
        return _empirical_mixed_moment(spec, source, pair, budget)
    dists = list(source)
    if len(dists) != spec.m:
        raise ValueError(f"need one distribution per argument ({spec.m})")
    m = spec.m
    if isinstance(pair, OmegaPair):
        if not pair.args <= set(range(1, m + 1)):
            raise ValueError(f"{pair!r} not within arguments 1..{m}")
        matchings = [{i: i for i in pair.args}]
    elif isinstance(pair, BetaPair):
        if len(pair.beta) != m:
            raise ValueError(f"beta has {len(pair.beta)} entries for m={m}")
        matching = {i: v for i, v in enumerate(pair.beta, start=1) if v}
        if any(not 1 <= v <= m for v in matching.values()) \
                or len(set(matching.values())) != len(matching):
            raise ValueError(f"{pair!r} is not an injective reuse map")
        matchings = [matching]
    elif isinstance(pair, AlphaPair):
        if layout is None:
            raise ValueError("alpha patterns need layout= (block structure)")
        matchings = _matching_of(pair, as_layout(layout))
    else:
        raise TypeError(f"not a pair pattern: {pair!r}")
    return _generator_mixed_moment(spec, dists, matchings, seed, mc_draws, budget)


def _empirical_mixed_moment(spec, samples: SampleSet, pair,
                            budget) -> MixedMoment:
    layout = samples.layout
    targets = _block_targets(pair, layout)
    block_pairs = []
    probe = 0
    for (kind, tgt), args, n in zip(targets, layout.block_args,
                                    layout.block_sizes):
        m_i = len(args)
        probe += math.perm(n, m_i) ** 2
        check_budget(probe, "pattern-constrained pair enumeration", budget)
        perms = list(itertools.permutations(range(n), m_i))
        matches = []
        for p in perms:
            for p2 in perms:
                where = {j: args[s] for s, j in enumerate(p2)}
                frag = {a: where[j] for a, j in zip(args, p) if j in where}
                ok = (frag == tgt) if kind == "frag" else (len(frag) == tgt)
                if ok:
                    matches.append((p, p2))
        if not matches:
            raise ValueError(f"pattern {pair!r} has probability 0 on this layout")
        block_pairs.append(matches)
    total = math.prod(len(mp) for mp in block_pairs)
    check_budget(total, "pattern-constrained pair enumeration", budget)
    arg_slots = layout.block_args
    s = 0.0
    count = 0
    rows_a: list[tuple[int, ...]] = []
    rows_b: list[tuple[int, ...]] = []

    def flush():
        nonlocal s, count
        if not rows_a:
            return
        va = evaluate_batch(spec, samples.values_matrix(np.array(rows_a)))
        vb = evaluate_batch(spec, samples.values_matrix(np.array(rows_b)))
        s += float(np.dot(va, vb))
        count += len(rows_a)
        rows_a.clear()
        rows_b.clear()

    for combo in itertools.product(*block_pairs):
        ja = [0] * layout.m
        jb = [0] * layout.m
        for args, (p, p2) in zip(arg_slots, combo):
            for a, j, j2 in zip(args, p, p2):
                ja[a - 1] = j
                jb[a - 1] = j2
        rows_a.append(tuple(ja))
        rows_b.append(tuple(jb))
        if len(rows_a) >= _EVAL_CHUNK:
            flush()
    flush()
    return MixedMoment(value=s / total, se=0.0, method="empirical-exact")


def _generator_mixed_moment(spec, dists, matchings, seed, mc_draws,
                            budget) -> MixedMoment:
    values = []
    ses = []
    for mi, matching in enumerate(matchings):
        v, se = _one_matching_moment(spec, dists, matching, seed, mi,
                                     mc_draws, budget)
        values.append(v)
        ses.append(se)
    k = len(values)
    value = sum(values) / k
    se = math.sqrt(sum(s * s for s in ses)) / k
    method = "generator-exact" if all(s == 0.0 for s in ses) else "generator-mc"
    return MixedMoment(value=value, se=se, method=method)


def _one_matching_moment(spec, dists, matching, seed, matching_index,
                         mc_draws, budget):
    m = spec.m
    fresh = [v for v in range(1, m + 1) if v not in set(matching.values())]
    finite = all(d.family == "empirical" for d in dists)
    if finite:
        dims = [len(dists[a - 1].params) for a in range(1, m + 1)]
        dims += [len(dists[v - 1].params) for v in fresh]
        total = math.prod(dims)
        try:
            check_budget(total, "finite-support moment grid", budget)
        except Exception:
            finite = False
        else:
            supports = [np.asarray(dists[a - 1].params) for a in range(1, m + 1)]
            supports += [np.asarray(dists[v - 1].params) for v in fresh]
            s = 0.0
            for start in range(0, total, _EVAL_CHUNK):
                flat = np.arange(start, min(start + _EVAL_CHUNK, total))
                grid = np.unravel_index(flat, dims)
                V = np.empty((len(flat), m))
                for a in range(m):
                    V[:, a] = supports[a][grid[a]]
                V2 = np.empty_like(V)
                inverse = {v: i for i, v in matching.items()}
                for v in range(1, m + 1):
                    if v in inverse:
                        V2[:, v - 1] = V[:, inverse[v] - 1]
                    else:
                        slot = m + fresh.index(v)
                        V2[:, v - 1] = supports[slot][grid[slot]]
                s += float(np.dot(evaluate_batch(spec, V),
                                  evaluate_batch(spec, V2)))
            return s / total, 0.0
    # Monte Carlo
    inverse = {v: i for i, v in matching.items()}
    s = 0.0
    s2 = 0.0
    for b, start, stop in block_ranges(mc_draws, BLOCK):
        rng = substream(seed, Lane.MIXED_MOMENT, matching_index, b)
        n = stop - start
        V = np.column_stack([dists[a].sample(rng, n) for a in range(m)])
        V2 = np.empty_like(V)
        for v in range(1, m + 1):
            if v in inverse:
                V2[:, v - 1] = V[:, inverse[v] - 1]
            else:
                V2[:, v - 1] = dists[v - 1].sample(rng, n)
        prod = evaluate_batch(spec, V) * evaluate_batch(spec, V2)
        s += float(prod.sum())
        s2 += float(np.square(prod).sum())
    mean = s / mc_draws
    var = max(s2 / mc_draws - mean * mean, 0.0)
    return mean, math.sqrt(var / mc_draws)


def _generator_moments(spec, dists, seed, mc_draws, budget):
    """(mu, mu2, se_mu) for a single realization under the generators."""
    m = spec.m
    finite = all(d.family == "empirical" for d in dists)
    if finite:
        dims = [len(d.params) for d in dists]
        total = math.prod(dims)
        try:
            check_budget(total, "finite-support moment grid", budget)
        except Exception:
            finite = False
        else:
            s1 = s2 = 0.0
            supports = [np.asarray(d.params) for d in dists]
            for start in range(0, total, _EVAL_CHUNK):
                flat = np.arange(start, min(start + _EVAL_CHUNK, total))
                grid = np.unravel_index(flat, dims)
                V = np.column_stack([supports[a][grid[a]] for a in range(m)])
                vals = evaluate_batch(spec, V)
                s1 += float(vals.sum())
                s2 += float(np.square(vals).sum())
            return s1 / total, s2 / total, 0.0
    s1 = s2 = 0.0
    for b, start, stop in block_ranges(mc_draws, BLOCK):
        rng = substream(seed, Lane.MIXED_MOMENT, 0, b)
        V = np.column_stack([d.sample(rng, stop - start) for d in dists])
        vals = evaluate_batch(spec, V)
        s1 += float(vals.sum())
        s2 += float(np.square(vals).sum())
    mu = s1 / mc_draws
    mu2 = s2 / mc_draws
    return mu, mu2, math.sqrt(max(mu2 - mu * mu, 0.0) / mc_draws)


# -- variance assembly ----------------------------------------------------

@dataclass(frozen=True)
class PairRow:
    """One pattern's contribution to the mixed moment."""

    pair: object
    probability: float
    moment: float
    moment_se: float


@dataclass(frozen=True)
class VarianceReport:
    """Exact variance of the r-realization estimate, with the pattern table."""

    variance: float
    variance_se: float
    r: int
    mu: float
    mu2: float
    mu11: float
    mode: str
    rows: tuple[PairRow, ...]

    def to_dict(self) -> dict:
        return {
            "variance": self.variance,
            "variance_se": self.variance_se,
            "r": self.r,
            "mu": self.mu,
            "mu2": self.mu2,
            "mu11": self.mu11,
            "mode": self.mode,
            "pairs": [
                {
                    "pattern": repr(row.pair),
                    "probability": row.probability,
                    "moment": row.moment,
                    "moment_se": row.moment_se,
                }
                for row in self.rows
            ],
        }


def resampling_variance(spec: SystemSpec, source, r: int, *, layout=None,
                        family: str = "auto", seed: int = 0,
                        mc_draws: int = 100_000,
                        budget: int | None = None) -> VarianceReport:
    """Variance of the r-realization resampling estimate.

    Empirical mode (``source`` is a SampleSet) conditions on the data:
    moments are exhaustive averages, and the result matches the spread of
    repeated seeded runs on the same data.  Generator mode (``source`` is a
    list of per-argument KnownDistribution, with ``layout`` giving block
    sizes) averages over the data draw as well.
    """
    if r < 1:
        raise ValueError(f"need r >= 1, got {r}")
    if isinstance(source, SampleSet):
        lay = source.layout
        ex = exhaustive_moments(spec, source, budget)
        mu, mu2, mu_se = ex.mu, ex.mu2, 0.0
        table = enumerate_pairs(lay, family, budget)
        rows = []
        for pat, p in table:
            mm = _empirical_mixed_moment(spec, source, pat, budget)
            rows.append(PairRow(pat, p, mm.value, mm.se))
        mode = "empirical"
    else:
        dists = list(source)
        if layout is None:
            raise ValueError("generator mode needs layout= (block sizes)")
        lay = as_layout(layout)
        if len(dists) != lay.m:
            raise ValueError(f"need one distribution per argument ({lay.m})")
        for args in lay.block_args:
            first = dists[args[0] - 1]
            for a in args[1:]:
                if dists[a - 1] != first:
                    raise ValueError(
                        f"arguments {args} share a sample and must share "
                        f"one distribution")
        if spec.m != lay.m:
            raise ValueError(
                f"system takes {spec.m} arguments but layout binds {lay.m}")
        mu, mu2, mu_se = _generator_moments(spec, dists, seed, mc_draws, budget)
        table = enumerate_pairs(lay, family, budget)
        rows = []
        for pi, (pat, p) in enumerate(table):
            matchings = _matching_of(pat, lay)
            mm = _generator_mixed_moment(spec, dists, matchings,
                                         seed + 1 + pi, mc_draws, budget)
            rows.append(PairRow(pat, p, mm.value, mm.se))
        mode = "generator"
    mu11 = sum(row.probability * row.moment for row in rows)
    variance = mu2 / r + (r - 1) / r * mu11 - mu * mu
    w = (r - 1) / r
    se = math.sqrt(
        sum((w * row.probability * row.moment_se) ** 2 for row in rows)
        + (2 * mu * mu_se) ** 2)
    return VarianceReport(variance=variance, variance_se=se, r=r, mu=mu,
                          mu2=mu2, mu11=mu11, mode=mode, rows=tuple(rows))
