"""Damage accumulation: arrivals that degrade for a random duration.

Damage events arrive as a Poisson stream (rate lambda); each event degrades
the unit for an independent duration with distribution F.  At time t,

    E X_t = lambda * int_0^t (1 - F(x)) dx     (active damage count)
    E Y_t = lambda * int_0^t F(x) dx           (terminal, duration elapsed)

and both counts are Poisson distributed (:func:`poisson_truth`).

With only data -- inter-arrival times H_A (n_A values) and durations H_B
(n_B values) -- :func:`resample_damage_counts` re-enacts the process: a
random permutation of all of H_A gives arrival epochs as partial sums, n_A
durations are drawn from H_B without replacement, and the counts are read
off.  The resampled arrival count can never exceed n_A, so the estimator's
expectation is a tail-capped version of the truth; :func:`estimator_expectation`
evaluates the capped formulas

    E E*X_t  = p1 [ sum_{j<=n_A} j d(j) + n_A P{J > n_A} ],
    E P*_X(i) = sum_{j=i}^{n_A} d(j) C(j,i) p1^i (1-p1)^(j-i)
              + C(n_A,i) p1^i (1-p1)^(n_A-i) P{J > n_A},

with J ~ Poisson(lambda t), d its pmf and p1 = E X_t / (lambda t) the
chance that an arrival uniform on (0, t) is still active at t.  These treat
the first n_A epochs as exchangeable uniforms even when more than n_A
arrivals fit before t, so they are close but not exact for small n_A; see
the tests for the exact order-statistics integral they are compared with.

:func:`damage_variance_mc` measures the estimator's variance/bias/MSE over
fresh data replications, and :func:`plugin_estimate` / :func:`hybrid_pmf`
give the parametric plug-in baseline and the spliced pmf that uses
resampling up to i = n_A and the plug-in tail beyond.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, stats

from ._streams import BLOCK, Lane, block_ranges, substream
from .distributions import KnownDistribution

__all__ = [
    "DamageData", "DamageTruth", "CountEstimates", "TruthSummary",
    "EstimatorExpectation", "DamageMCReport", "PluginMCReport",
    "resample_damage_counts", "poisson_truth", "estimator_expectation",
    "damage_variance_mc", "plugin_estimate", "plugin_expectation",
    "plugin_variance_mc", "hybrid_pmf",
]


@dataclass(frozen=True, eq=False)
class DamageData:
    """Observed inter-arrival times (H_A) and degradation durations (H_B)."""

    h_a: np.ndarray
    h_b: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.h_a, dtype=float)
        b = np.asarray(self.h_b, dtype=float)
        if a.ndim != 1 or a.size == 0 or b.ndim != 1 or b.size == 0:
            raise ValueError("h_a and h_b must be non-empty 1-d arrays")
        if np.any(a < 0) or np.any(b < 0):
            raise ValueError("times and durations must be non-negative")
        if a.size > b.size:
            raise ValueError(
                f"need n_A <= n_B to draw {a.size} durations without "
                f"replacement from {b.size}")
        a = a.copy(); a.flags.writeable = False
        b = b.copy(); b.flags.writeable = False
        object.__setattr__(self, "h_a", a)
        object.__setattr__(self, "h_b", b)

    @property
    def n_a(self) -> int:
        return len(self.h_a)

    @property
    def n_b(self) -> int:
        return len(self.h_b)


@dataclass(frozen=True)
class DamageTruth:
    """Generating model: Poisson arrivals plus a known duration distribution."""

    rate: float
    degradation: KnownDistribution

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError(f"arrival rate must be positive, got {self.rate}")
        lo, _ = self.degradation.support()
        if lo < 0:
            raise ValueError("degradation durations must be non-negative")


@dataclass(frozen=True, eq=False)
class CountEstimates:
    """Resampling estimates of the damage-count law at time t."""

    t: float
    r: int
    seed: int
    active_mean: float
    terminal_mean: float
    active_pmf: np.ndarray    # index i = P*{X_t = i}, i = 0..n_A
    terminal_pmf: np.ndarray
    diagnostics: dict

    @property
    def n_a(self) -> int:
        return len(self.active_pmf) - 1

    def _se(self, pmf, mean: float) -> float:
        counts = np.arange(len(pmf))
        second = float(np.dot(pmf, counts ** 2))
        return math.sqrt(max(second - mean ** 2, 0.0) / self.r)

    @property
    def active_se(self) -> float:
        """SE of the active mean, from the realization spread."""
        return self._se(self.active_pmf, self.active_mean)

    @property
    def terminal_se(self) -> float:
        return self._se(self.terminal_pmf, self.terminal_mean)


def resample_damage_counts(data: DamageData, t: float, r: int,
                           seed: int) -> CountEstimates:
    """Estimate the damage-count law by re-enacting the process r times.

    Each realization permutes all of H_A into arrival epochs (partial sums)
    and attaches durations drawn from H_B without replacement; the active
    count is the number of epochs tau <= t < tau + duration, the terminal
    count the number with tau + duration <= t.
    """
    if t < 0:
        raise ValueError(f"time t must be non-negative, got {t}")
    if r < 1:
        raise ValueError(f"need r >= 1 realizations, got {r}")
    n_a, n_b = data.n_a, data.n_b
    active = np.empty(r, dtype=np.intp)
    terminal = np.empty(r, dtype=np.intp)
    dur_overlap = 0.0
    perm_fixed = 0.0
    pairs = 0
    for b, start, stop in block_ranges(r, BLOCK):
        rng = substream(seed, Lane.DAMAGE_RESAMPLE, b)
        rows = stop - start
        perm = np.argsort(rng.random((rows, n_a)), axis=1)
        tau = np.cumsum(data.h_a[perm], axis=1)
        which = np.argsort(rng.random((rows, n_b)), axis=1)[:, :n_a]
        dur = data.h_b[which]
        end = tau + dur
        active[start:stop] = np.sum((tau <= t) & (t < end), axis=1)
        terminal[start:stop] = np.sum(end <= t, axis=1)
        if rows >= 2:
            # reuse bookkeeping for the block's first realization pair
            dur_overlap += len(set(which[0]) & set(which[1]))
            perm_fixed += int(np.sum(perm[0] == perm[1]))
            pairs += 1
    edges = np.arange(n_a + 2)
    active_pmf = np.histogram(active, bins=edges)[0] / r
    terminal_pmf = np.histogram(terminal, bins=edges)[0] / r
    diagnostics = {
        "duration_overlap_mean": dur_overlap / pairs if pairs else float("nan"),
        "arrival_fixed_points_mean": perm_fixed / pairs if pairs else float("nan"),
        "pairs_inspected": pairs,
    }
    return CountEstimates(
        t=float(t), r=r, seed=seed,
        active_mean=float(active.mean()),
        terminal_mean=float(terminal.mean()),
        active_pmf=active_pmf, terminal_pmf=terminal_pmf,
        diagnostics=diagnostics)


# -- model-side quantities ------------------------------------------------

def _integral_sf(deg: KnownDistribution, t: float) -> float:
    """int_0^t (1 - F(x)) dx with breakpoints at the distribution's corners."""
    pts = [p for p in deg.support() if 0.0 < p < t]
    val, _ = integrate.quad(deg.sf, 0.0, t, points=pts or None, limit=200)
    return val


@dataclass(frozen=True)
class TruthSummary:
    """Exact damage-count law under the generating model."""

    t: float
    rate: float
    active_mean: float
    terminal_mean: float

    def active_pmf(self, i):
        return stats.poisson.pmf(i, self.active_mean)

    def terminal_pmf(self, i):
        return stats.poisson.pmf(i, self.terminal_mean)


def poisson_truth(truth: DamageTruth, t: float) -> TruthSummary:
    """Exact E X_t, E Y_t and Poisson count laws at time t."""
    if t < 0:
        raise ValueError(f"time t must be non-negative, got {t}")
    isf = _integral_sf(truth.degradation, t)
    return TruthSummary(t=float(t), rate=truth.rate,
                        active_mean=truth.rate * isf,
                        terminal_mean=truth.rate * (t - isf))


@dataclass(frozen=True, eq=False)
class EstimatorExpectation:
    """Tail-capped expectation of the resampling estimator under the model."""

    t: float
    n_a: int
    p1: float
    active_mean: float
    active_pmf: np.ndarray  # E P*_{X_t}(i), i = 0..n_A


def estimator_expectation(truth: DamageTruth, n_a: int, t: float) -> EstimatorExpectation:
    """Expected value of the n_A-capped resampling estimator (see module doc)."""
    if n_a < 1:
        raise ValueError(f"need n_A >= 1, got {n_a}")
    summ = poisson_truth(truth, t)
    lam_t = truth.rate * t
    p1 = summ.active_mean / lam_t if lam_t > 0 else 0.0
    j = np.arange(0, n_a + 1)
    d = stats.poisson.pmf(j, lam_t)
    tail = float(stats.poisson.sf(n_a, lam_t))
    mean = p1 * (float(np.dot(j, d)) + n_a * tail)
    pmf = np.empty(n_a + 1)
    for i in range(n_a + 1):
        jj = np.arange(i, n_a + 1)
        body = float(np.dot(stats.poisson.pmf(jj, lam_t),
                            stats.binom.pmf(i, jj, p1)))
        pmf[i] = body + float(stats.binom.pmf(i, n_a, p1)) * tail
    return EstimatorExpectation(t=float(t), n_a=n_a, p1=p1,
                                active_mean=mean, active_pmf=pmf)


# -- replication study ----------------------------------------------------

@dataclass(frozen=True)
class DamageMCReport:
    """Spread of the resampling estimate over fresh data replications."""

    t: float
    n_a: int
    n_b: int
    r: int
    replications: int
    truth_active_mean: float
    estimate_mean: float
    estimate_var: float
    estimate_mse: float
    mean_se: float
    diagnostics: dict


def damage_variance_mc(truth: DamageTruth, n_a: int, n_b: int, t: float,
                       r: int, replications: int, seed: int,
                       threads: int = 1) -> DamageMCReport:
    """Draw fresh (H_A, H_B) data repeatedly; study the active-mean estimate.

    Variance is taken around the replication mean, MSE around the exact
    E X_t of the generating model.  Replications are keyed by index, so
    the result does not depend on ``threads``.
    """
    if n_a > n_b:
        raise ValueError(f"need n_A <= n_B, got {n_a} > {n_b}")
    if replications < 2:
        raise ValueError("need at least 2 replications")
    summ = poisson_truth(truth, t)
    estimates = np.empty(replications, dtype=float)
    overlap = np.empty(replications, dtype=float)
    fixed = np.empty(replications, dtype=float)

    def run_rep(rep):
        rng = substream(seed, Lane.DAMAGE_OUTER, rep)
        h_a = rng.exponential(1.0 / truth.rate, n_a)
        h_b = truth.degradation.sample(rng, n_b)
        inner_seed = int(rng.integers(0, 2 ** 62))
        est = resample_damage_counts(DamageData(h_a, h_b), t, r, inner_seed)
        estimates[rep] = est.active_mean
        overlap[rep] = est.diagnostics["duration_overlap_mean"]
        fixed[rep] = est.diagnostics["arrival_fixed_points_mean"]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run_rep, range(replications)))
    else:
        for rep in range(replications):
            run_rep(rep)
    mean = float(estimates.mean())
    var = float(estimates.var(ddof=1))
    mse = float(np.mean((estimates - summ.active_mean) ** 2))
    return DamageMCReport(
        t=float(t), n_a=n_a, n_b=n_b, r=r, replications=replications,
        truth_active_mean=summ.active_mean,
        estimate_mean=mean, estimate_var=var, estimate_mse=mse,
        mean_se=float(math.sqrt(var / replications)),
        diagnostics={
            "duration_overlap_mean": float(overlap.mean()),
            "arrival_fixed_points_mean": float(fixed.mean()),
        })


# -- plug-in baseline and hybrid pmf --------------------------------------

@dataclass(frozen=True)
class PluginEstimate:
    """Parametric plug-in: exponential arrivals + empirical durations."""

    t: float
    rate: float
    active_mean: float
    terminal_mean: float

    def active_pmf(self, i):
        return stats.poisson.pmf(i, self.active_mean)


def plugin_estimate(data: DamageData, t: float) -> PluginEstimate:
    """Fit lambda = n_A / sum(H_A) and the duration ecdf; read the law off.

    int_0^t (1 - Fhat(x)) dx reduces to the mean of min(duration, t).
    """
    rate = data.n_a / float(data.h_a.sum())
    isf = float(np.minimum(data.h_b, t).mean())
    return PluginEstimate(t=float(t), rate=rate, active_mean=rate * isf,
                          terminal_mean=rate * (t - isf))


def plugin_expectation(truth: DamageTruth, n_a: int, t: float) -> float:
    """Exact mean of the plug-in active estimate under the generating model.

    lambda-hat = n_A / sum(H_A) has mean lambda n_A/(n_A - 1) for
    exponential inter-arrivals, independent of the duration part whose
    integral estimate is unbiased; needs n_A >= 2.
    """
    if n_a < 2:
        raise ValueError("the plug-in rate has no finite mean for n_A < 2")
    return (n_a / (n_a - 1.0)) * truth.rate * _integral_sf(truth.degradation, t)


@dataclass(frozen=True)
class PluginMCReport:
    """Replication study of the plug-in estimate on fresh data."""

    t: float
    n_a: int
    n_b: int
    replications: int
    truth_active_mean: float
    estimate_mean: float
    estimate_var: float
    estimate_mse: float
    mean_se: float


def plugin_variance_mc(truth: DamageTruth, n_a: int, n_b: int, t: float,
                       replications: int, seed: int) -> PluginMCReport:
    """Bias/Var/MSE of the plug-in estimate over fresh-data replications.

    Uses the same data substreams as :func:`damage_variance_mc`, so with
    equal seeds the two studies see identical datasets.
    """
    if replications < 2:
        raise ValueError("need at least 2 replications")
    summ = poisson_truth(truth, t)
    estimates = np.empty(replications, dtype=float)
    for rep in range(replications):
        rng = substream(seed, Lane.DAMAGE_OUTER, rep)
        h_a = rng.exponential(1.0 / truth.rate, n_a)
        h_b = truth.degradation.sample(rng, n_b)
        estimates[rep] = plugin_estimate(DamageData(h_a, h_b), t).active_mean
    mean = float(estimates.mean())
    var = float(estimates.var(ddof=1))
    mse = float(np.mean((estimates - summ.active_mean) ** 2))
    return PluginMCReport(
        t=float(t), n_a=n_a, n_b=n_b, replications=replications,
        truth_active_mean=summ.active_mean, estimate_mean=mean,
        estimate_var=var, estimate_mse=mse,
        mean_se=float(math.sqrt(var / replications)))


def hybrid_pmf(counts: CountEstimates, plugin: PluginEstimate,
               i_max: int) -> np.ndarray:
    """Splice the resampled pmf (i <= n_A) with the plug-in tail, renormalized.

    The resampling route cannot produce counts above n_A; beyond that the
    plug-in Poisson tail fills in, and the whole vector is renormalized.
    """
    if i_max < counts.n_a:
        raise ValueError(f"i_max must cover the resampled range 0..{counts.n_a}")
    out = np.empty(i_max + 1)
    out[:counts.n_a + 1] = counts.active_pmf
    out[counts.n_a + 1:] = plugin.active_pmf(np.arange(counts.n_a + 1, i_max + 1))
    total = out.sum()
    if total > 0:
        out /= total
    return out
