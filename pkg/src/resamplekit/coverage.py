"""Coverage analysis of resampling quantile confidence intervals.

Setting: m distinct samples, an order functional phi whose value depends
only on how the pooled values interleave, and the upper interval
(Theta*_(floor(alpha k)), 1) built from k independent resampling
experiments of r realizations each, alpha = 1 - gamma.

Conditionally on the interleaving (the W vector) the success probability
q of one realization is a ratio of counting outcomes; one experiment
undershoots Theta with probability rho = P{Bin(r, q) < Theta r}, and the
interval covers with conditional probability R_C = P{Bin(k, rho) >=
floor(alpha k)}.  The unconditional coverage R averages R_C over the
ordering law P_W: exactly (enumerating W vectors) for exponential or
other continuous generators, or by Monte Carlo over simulated datasets.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy import stats

from ._streams import BLOCK, Lane, block_ranges, substream
from .budget import check_budget, enumeration_budget
from .distributions import KnownDistribution
from .samples import SampleSet
from .systems import Compare, Input, KOfN, Max, Min, SystemSpec, evaluate_batch

__all__ = [
    "OrderFunctional", "WVector", "Protocol", "CoverageReport",
    "IntervalResult", "w_vector", "protocol_from_w", "w_from_protocol",
    "q_given_ordering", "rho", "alpha_floor", "coverage_conditional",
    "coverage_R", "resampling_interval",
]

_EPS = 1e-9

_ORDER_NODES = (Input, Min, Max, KOfN, Compare)


@dataclass(frozen=True, eq=False)
class OrderFunctional:
    """An indicator system whose value depends only on the pooled ordering.

    Allowed nodes: inputs, min, max, k-of-n selection and comparisons
    between subexpressions.  Sums and comparisons against constants are
    rejected: their outcome changes under monotone transforms of the
    values, so no conditional success probability given the ordering
    exists.
    """

    spec: SystemSpec

    def __post_init__(self):
        for nid in self.spec.node_ids:
            node = self.spec.node_ids[nid]
            if not isinstance(node, _ORDER_NODES):
                raise ValueError(
                    f"node {type(node).__name__} is not order-invariant; "
                    "order functionals allow min/max/kofn/cmp only")
        if not isinstance(self.spec.root, Compare):
            raise ValueError("order functional root must be a comparison "
                             "(an indicator)")

    @property
    def m(self) -> int:
        return self.spec.m


@dataclass(frozen=True)
class WVector:
    """Pooled-order sample labels: w[j] = which sample the j-th smallest
    pooled value came from (labels 1..m)."""

    w: tuple[int, ...]

    def __post_init__(self):
        labels = sorted(set(self.w))
        if not labels:
            raise ValueError("empty W vector")
        if labels != list(range(1, labels[-1] + 1)):
            raise ValueError(f"labels must be 1..m without gaps, got {labels}")
        object.__setattr__(self, "w", tuple(int(x) for x in self.w))

    @property
    def m(self) -> int:
        return max(self.w)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(self.w.count(i) for i in range(1, self.m + 1))


@dataclass(frozen=True)
class Protocol:
    """Level-wise counting encoding of an interleaving.

    Level l (1 <= l < m) splits the pooled sequence at the positions of
    sample l+1's values: counts[l-1][g] is how many values with labels
    <= l fall in gap g (there are n_{l+1}+1 gaps).
    """

    counts: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(
            self, "counts",
            tuple(tuple(int(c) for c in row) for row in self.counts))
        for row in self.counts:
            if any(c < 0 for c in row):
                raise ValueError(f"negative count in protocol row {row}")

    @property
    def m(self) -> int:
        return len(self.counts) + 1


def w_vector(samples, on_ties: str = "error") -> WVector:
    """Pooled-order label vector of a dataset.

    ``samples`` is a SampleSet or a sequence of 1-d arrays.  Ties across
    the pooled values make order functionals ill-defined: ``on_ties``
    is ``"error"`` (default) or ``"break"`` (stable order by sample
    index, with a warning).
    """
    if isinstance(samples, SampleSet):
        columns = samples.columns
    else:
        columns = tuple(np.asarray(c, dtype=float) for c in samples)
    labels = np.concatenate(
        [np.full(len(col), i + 1, dtype=int) for i, col in enumerate(columns)])
    pooled = np.concatenate(columns)
    if len(np.unique(pooled)) != len(pooled):
        if on_ties == "break":
            warnings.warn("ties in pooled values broken by sample index; "
                          "order functionals are ill-defined under ties",
                          stacklevel=2)
        else:
            raise ValueError("ties in pooled values (pass on_ties='break' "
                             "to order tied values by sample index)")
    order = np.argsort(pooled, kind="stable")
    return WVector(tuple(int(x) for x in labels[order]))


def protocol_from_w(w: WVector) -> Protocol:
    """Per-level gap counts of an interleaving."""
    rows = []
    for level in range(1, w.m):
        gaps = [0]
        for label in w.w:
            if label == level + 1:
                gaps.append(0)
            elif label <= level:
                gaps[-1] += 1
        rows.append(tuple(gaps))
    return Protocol(tuple(rows))


def w_from_protocol(protocol: Protocol) -> WVector:
    """Rebuild the W vector; inverse of protocol_from_w."""
    # level-1 count row interleaves samples 1 and 2; each later row
    # interleaves the already-merged prefix with the next sample
    counts = protocol.counts
    if not counts:
        raise ValueError("protocol has no levels: need at least two samples")
    first = counts[0]
    merged = []
    for g, c in enumerate(first):
        merged.extend([1] * c)
        if g < len(first) - 1:
            merged.append(2)
    for level in range(2, protocol.m):
        row = counts[level - 1]
        if sum(row) != len(merged):
            raise ValueError(
                f"protocol row {level} accounts for {sum(row)} values, "
                f"prefix has {len(merged)}")
        new = []
        pos = 0
        for g, c in enumerate(row):
            new.extend(merged[pos:pos + c])
            pos += c
            if g < len(row) - 1:
                new.append(level + 1)
        merged = new
    return WVector(tuple(merged))


def q_given_ordering(func: OrderFunctional, w: WVector,
                     budget: int | None = None) -> float:
    """Conditional success probability of one realization given the ordering.

    Every argument draws uniformly from its own sample; only ranks matter,
    so the pooled positions serve as values and q is an exact ratio
    (count of succeeding index combinations over the product of sizes).
    """
    if func.m != w.m:
        raise ValueError(f"functional has {func.m} arguments, W vector has "
                         f"{w.m} samples")
    positions = [[] for _ in range(w.m)]
    for rank, label in enumerate(w.w):
        positions[label - 1].append(float(rank + 1))
    total = math.prod(len(p) for p in positions)
    check_budget(total, "q_given_ordering enumeration", budget)
    grids = np.meshgrid(*[np.asarray(p) for p in positions], indexing="ij")
    values = np.stack([g.ravel() for g in grids], axis=1)
    phi = evaluate_batch(func.spec, values)
    return float(np.count_nonzero(phi)) / total


def rho(q: float, theta: float, r: int) -> float:
    """P{one experiment's estimate falls below theta}: P{Bin(r,q) < theta r}.

    The upper summation limit is read strictly: successes up to
    ceil(theta r) - 1 (an epsilon guards float ceilings).
    """
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must be in [0,1], got {q}")
    if r < 1:
        raise ValueError(f"need r >= 1, got {r}")
    kmax = math.ceil(theta * r - _EPS) - 1
    if kmax < 0:
        return 0.0
    if kmax >= r:
        return 1.0
    return float(stats.binom.cdf(kmax, r, q))


def alpha_floor(alpha: float, k: int) -> int:
    """floor(alpha k) = max{xi >= 1 : xi <= alpha k}, epsilon-guarded.

    Raises when alpha k < 1: the quantile interval is undefined there.
    """
    if k < 1:
        raise ValueError(f"need k >= 1, got {k}")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0,1), got {alpha}")
    j = math.floor(alpha * k + _EPS)
    if j < 1:
        raise ValueError(
            f"floor(alpha k) = 0 for alpha={alpha}, k={k}: the upper "
            "interval is undefined (increase k or lower gamma)")
    return min(j, k)


def coverage_conditional(rho_: float, k: int, alpha: float) -> float:
    """P{Bin(k, rho) >= floor(alpha k)}: conditional interval coverage."""
    if not 0.0 <= rho_ <= 1.0:
        raise ValueError(f"rho must be in [0,1], got {rho_}")
    j0 = alpha_floor(alpha, k)
    return float(stats.binom.sf(j0 - 1, k, rho_))


# -- the ordering law -----------------------------------------------------

def _exponential_rates(generators) -> list[float] | None:
    rates = []
    for g in generators:
        if g.family != "exponential":
            return None
        rates.append(float(g.params[0]))
    return rates


def _pw_exponential(w: tuple[int, ...], rates, sizes) -> float:
    """Exact ordering probability for exponential generators.

    Memorylessness reduces the pooled ordering to a race: the next order
    statistic carries label i with probability c_i l_i / sum c_j l_j,
    c = remaining counts.
    """
    remaining = list(sizes)
    p = 1.0
    for label in w:
        num = remaining[label - 1] * rates[label - 1]
        den = sum(c * r for c, r in zip(remaining, rates))
        p *= num / den
        remaining[label - 1] -= 1
    return p


class _NumericOrderingLaw:
    """P_W for general continuous generators by grid integration.

    P_W = (prod n_i!) * int_{x_1<...<x_n} prod f_{w_j}(x_j) dx, evaluated
    by the chain of running integrals I_j(x) = int^x f_{w_j} I_{j-1};
    trapezoidal on a shared grid clipped to extreme quantiles.
    """

    def __init__(self, generators, sizes, points: int = 2048):
        qs = (1e-10, 1.0 - 1e-10)
        lo = min(float(g.ppf(qs[0])) for g in generators)
        hi = max(float(g.ppf(qs[1])) for g in generators)
        self.grid = np.linspace(lo, hi, points)
        self.dens = [np.asarray(g.pdf(self.grid), dtype=float)
                     for g in generators]
        self.scale = float(math.prod(math.factorial(n) for n in sizes))

    def pw(self, w: tuple[int, ...]) -> float:
        cur = np.ones_like(self.grid)
        h = self.grid[1] - self.grid[0]
        for label in w:
            f = self.dens[label - 1] * cur
            # running trapezoid: I(x_k) = sum of trapezoids up to k
            inc = np.empty_like(f)
            inc[0] = 0.0
            inc[1:] = (f[1:] + f[:-1]) * (h / 2.0)
            cur = np.cumsum(inc)
        return self.scale * float(cur[-1])


def _enumerate_w(sizes):
    """All distinct label interleavings, lexicographic."""
    m = len(sizes)
    w = []
    remaining = list(sizes)
    total = sum(sizes)

    def rec():
        if len(w) == total:
            yield tuple(w)
            return
        for i in range(m):
            if remaining[i]:
                remaining[i] -= 1
                w.append(i + 1)
                yield from rec()
                w.pop()
                remaining[i] += 1

    yield from rec()


@dataclass(frozen=True)
class ProtocolRow:
    """Exact-mode table entry for one interleaving."""

    w: tuple[int, ...]
    probability: float
    q: float
    rho: float
    coverage: tuple[float, ...]


@dataclass(frozen=True)
class CoverageReport:
    """Unconditional coverage of the quantile interval, per gamma."""

    mode: str
    sizes: tuple[int, ...]
    theta: float
    k: int
    r: int
    gammas: tuple[float, ...]
    coverage: tuple[float, ...]
    se: tuple[float, ...] | None
    replications: int | None
    seed: int | None
    total_probability: float | None = None
    table: tuple[ProtocolRow, ...] | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        out = {
            "mode": self.mode, "sizes": list(self.sizes),
            "theta": self.theta, "k": self.k, "r": self.r,
            "gammas": list(self.gammas), "coverage": list(self.coverage),
        }
        if self.se is not None:
            out["se"] = list(self.se)
        if self.replications is not None:
            out["replications"] = self.replications
        if self.seed is not None:
            out["seed"] = self.seed
        if self.total_probability is not None:
            out["total_probability"] = self.total_probability
        return out


def _as_gammas(gamma) -> tuple[float, ...]:
    if np.isscalar(gamma):
        gamma = (float(gamma),)
    gammas = tuple(float(g) for g in gamma)
    for g in gammas:
        if not 0.0 < g < 1.0:
            raise ValueError(f"gamma must be in (0,1), got {g}")
    return gammas


def coverage_R(func: OrderFunctional, generators, sizes, theta: float,
               gamma, k: int, r: int, mode: str = "exact",
               seed: int | None = None, replications: int = 10_000,
               budget: int | None = None, threads: int = 1) -> CoverageReport:
    """Unconditional coverage R = E_W[R_C] of the upper quantile interval.

    exact mode enumerates interleavings and averages R_C under the
    ordering law of the generators (closed-form race for exponentials,
    numeric integration otherwise).  mc mode simulates datasets with
    keyed substreams and reports mean and SE per gamma.
    """
    sizes = tuple(int(n) for n in sizes)
    generators = tuple(generators)
    if len(generators) != func.m or len(sizes) != func.m:
        raise ValueError(
            f"functional takes {func.m} arguments; got {len(generators)} "
            f"generators and {len(sizes)} sizes")
    if any(n < 1 for n in sizes):
        raise ValueError(f"sample sizes must be positive, got {sizes}")
    for g in generators:
        if not g.is_continuous:
            raise ValueError(f"generators must be continuous, got {g}")
    gammas = _as_gammas(gamma)
    for g in gammas:
        alpha_floor(1.0 - g, k)  # fail fast on undefined intervals
    q_cache: dict[tuple[int, ...], float] = {}

    def q_of(w_tuple):
        q = q_cache.get(w_tuple)
        if q is None:
            q = q_given_ordering(func, WVector(w_tuple), budget=budget)
            q_cache[w_tuple] = q
        return q

    if mode == "exact":
        total_w = math.factorial(sum(sizes))
        for n in sizes:
            total_w //= math.factorial(n)
        check_budget(total_w, "ordering enumeration", budget)
        rates = _exponential_rates(generators)
        law = None if rates is not None else \
            _NumericOrderingLaw(generators, sizes)
        cov = np.zeros(len(gammas))
        total_p = 0.0
        rows = []
        for w_tuple in _enumerate_w(sizes):
            p = _pw_exponential(w_tuple, rates, sizes) if rates is not None \
                else law.pw(w_tuple)
            q = q_of(w_tuple)
            rho_w = rho(q, theta, r)
            rc = tuple(coverage_conditional(rho_w, k, 1.0 - g)
                       for g in gammas)
            cov += p * np.asarray(rc)
            total_p += p
            rows.append(ProtocolRow(w_tuple, p, q, rho_w, rc))
        return CoverageReport(
            mode="exact", sizes=sizes, theta=float(theta), k=k, r=r,
            gammas=gammas, coverage=tuple(float(c) for c in cov), se=None,
            replications=None, seed=None, total_probability=float(total_p),
            table=tuple(rows))

    if mode != "mc":
        raise ValueError(f"mode must be 'exact' or 'mc', got {mode!r}")
    if seed is None:
        raise ValueError("mc mode needs a seed")
    if replications < 2:
        raise ValueError("need at least 2 mc replications")
    rc_all = np.empty((replications, len(gammas)))
    labels = np.concatenate(
        [np.full(n, i + 1, dtype=int) for i, n in enumerate(sizes)])
    rc_cache: dict[tuple[int, ...], list[float]] = {}

    def run_block(args):
        b, start, stop = args
        rng = substream(seed, Lane.COVERAGE_MC, b)
        rows = stop - start
        draws = np.concatenate(
            [g.sample(rng, (rows, n)) for g, n in zip(generators, sizes)],
            axis=1)
        # stable argsort breaks (measure-zero) ties by sample index
        w_rows = labels[np.argsort(draws, axis=1, kind="stable")]
        for i in range(rows):
            w_t = tuple(w_rows[i].tolist())
            rc = rc_cache.get(w_t)
            if rc is None:
                rho_w = rho(q_of(w_t), theta, r)
                rc = [coverage_conditional(rho_w, k, 1.0 - g)
                      for g in gammas]
                rc_cache[w_t] = rc
            rc_all[start + i] = rc

    blocks = list(block_ranges(replications, BLOCK))
    if threads > 1:
        # q_cache is shared; dict get/set are atomic and recomputation is
        # idempotent, so worst case is duplicated work, never a wrong value
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run_block, blocks))
    else:
        for blk in blocks:
            run_block(blk)
    mean = rc_all.mean(axis=0)
    se = rc_all.std(axis=0, ddof=1) / math.sqrt(replications)
    return CoverageReport(
        mode="mc", sizes=sizes, theta=float(theta), k=k, r=r, gammas=gammas,
        coverage=tuple(float(x) for x in mean),
        se=tuple(float(x) for x in se), replications=replications,
        seed=seed)


@dataclass(frozen=True)
class IntervalResult:
    """Upper confidence interval from k resampling experiments."""

    a: float
    interval: tuple[float, float]
    gamma: float
    k: int
    r: int
    estimates: tuple[float, ...]


def resampling_interval(func: OrderFunctional, samples: SampleSet,
                        gamma: float, k: int, r: int,
                        seed: int) -> IntervalResult:
    """(Theta*_(floor(alpha k)), 1) with alpha = 1 - gamma.

    Runs k independent experiments of r realizations each on the given
    samples; a is the floor(alpha k)-th smallest estimate.
    """
    from .resampling import draw_index_batch

    gamma = float(gamma)
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must be in (0,1), got {gamma}")
    j0 = alpha_floor(1.0 - gamma, k)
    if r < 1:
        raise ValueError(f"need r >= 1, got {r}")
    estimates = np.empty(k)
    for e in range(k):
        values = np.empty(r)
        for b, start, stop in block_ranges(r, BLOCK):
            rng = substream(seed, Lane.COVERAGE_INTERVAL, e, b)
            idx = draw_index_batch(samples, stop - start, rng)
            values[start:stop] = evaluate_batch(
                func.spec, samples.values_matrix(idx))
        estimates[e] = values.mean()
    a = float(np.sort(estimates)[j0 - 1])
    return IntervalResult(a=a, interval=(a, 1.0), gamma=gamma, k=k, r=r,
                          estimates=tuple(float(x) for x in estimates))
