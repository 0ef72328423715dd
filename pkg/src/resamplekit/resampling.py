"""Plain resampling of a structure function over fixed samples.

One realization draws an admissible index vector -- for each block, ordered
positions without replacement from the backing sample -- and evaluates the
structure function on the selected values.  The estimate averages ``r``
realizations.  Conditional on the data the estimate is unbiased for the
exhaustive mean over all admissible vectors, which :func:`exhaustive_theta`
computes directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._streams import BLOCK, Lane, block_ranges, substream
from .samples import SampleSet
from .systems import SystemSpec, evaluate, evaluate_batch

__all__ = [
    "ResampleIndexVector", "EstimateResult", "draw_resample",
    "draw_index_batch", "estimate_theta", "exhaustive_moments",
    "exhaustive_theta",
]

# above this many cells, per-row choice beats the argsort trick on memory
_ARGSORT_CELL_LIMIT = 1 << 22


@dataclass(frozen=True)
class ResampleIndexVector:
    """0-based positions into each argument's backing sample (length m)."""

    indices: tuple[int, ...]

    def __len__(self):
        return len(self.indices)


@dataclass(frozen=True)
class EstimateResult:
    """Resampling estimate plus bookkeeping.

    Attributes
    ----------
    estimate : float
        Mean of the realization values.
    realizations : int
        Number of realizations r.
    seed : int
        Run seed the realizations were keyed by.
    empirical_variance : float
        Sample variance (ddof=1) of the realization values; 0 when r = 1.
    values : numpy.ndarray or None
        Per-realization values when retained.
    """

    estimate: float
    realizations: int
    seed: int
    empirical_variance: float
    values: np.ndarray | None = None

    @property
    def standard_error(self) -> float:
        """SE of the estimate: sqrt(empirical variance / r)."""
        return math.sqrt(self.empirical_variance / self.realizations)


def draw_resample(samples: SampleSet, rng: np.random.Generator) -> ResampleIndexVector:
    """Draw one admissible index vector with the caller's generator."""
    vec = [0] * samples.m
    for b in samples.blocks:
        picked = rng.choice(b.size, size=b.draw_count, replace=False)
        for a, j in zip(b.args, picked):
            vec[a - 1] = int(j)
    return ResampleIndexVector(tuple(vec))


def draw_index_batch(samples: SampleSet, count: int,
                     rng: np.random.Generator) -> np.ndarray:
    """Draw ``count`` admissible index vectors; returns (count, m) ints."""
    out = np.empty((count, samples.m), dtype=np.intp)
    for b in samples.blocks:
        if b.draw_count == 1:
            out[:, b.args[0] - 1] = rng.integers(0, b.size, size=count)
            continue
        if count * b.size <= _ARGSORT_CELL_LIMIT:
            # rank the first draw_count of a random permutation per row
            order = np.argsort(rng.random((count, b.size)), axis=1)
            picked = order[:, :b.draw_count]
        else:
            picked = np.empty((count, b.draw_count), dtype=np.intp)
            for i in range(count):
                picked[i] = rng.choice(b.size, size=b.draw_count, replace=False)
        for pos, a in enumerate(b.args):
            out[:, a - 1] = picked[:, pos]
    return out


def realization_values(spec: SystemSpec, samples: SampleSet, r: int, seed: int,
                       lane: int = Lane.SIMPLE_ESTIMATE) -> np.ndarray:
    """Values of r independent realizations, keyed by (seed, lane, block)."""
    if samples.m != spec.m:
        raise ValueError(
            f"system takes {spec.m} arguments but samples bind {samples.m}")
    if r < 1:
        raise ValueError(f"need r >= 1 realizations, got {r}")
    values = np.empty(r, dtype=float)
    for b, start, stop in block_ranges(r, BLOCK):
        rng = substream(seed, lane, b)
        idx = draw_index_batch(samples, stop - start, rng)
        values[start:stop] = evaluate_batch(spec, samples.values_matrix(idx))
    return values


def estimate_theta(spec: SystemSpec, samples: SampleSet, r: int | None,
                   seed: int | None = None,
                   keep_values: bool = False) -> EstimateResult:
    """Average the structure function over ``r`` resampled argument vectors.

    Deterministic in ``seed`` and independent of how work is scheduled.
    ``r=None`` enumerates every admissible index vector once instead of
    sampling (no seed needed); the result then equals the exhaustive mean.
    """
    if r is None:
        vals = [float(evaluate(spec, samples.values_matrix(vec)[0]))
                for vec in samples.enumerate_index_vectors()]
        values = np.array(vals)
    else:
        if seed is None:
            raise ValueError("a seed is required when sampling (r is not None)")
        values = realization_values(spec, samples, r, seed)
    n = len(values)
    var = float(np.var(values, ddof=1)) if n > 1 else 0.0
    return EstimateResult(
        estimate=float(values.mean()),
        realizations=n,
        seed=seed,
        empirical_variance=var,
        values=values if keep_values else None,
    )


@dataclass(frozen=True)
class ExhaustiveMoments:
    """First two moments of the realization value over all admissible vectors."""

    mu: float
    mu2: float
    count: int


def exhaustive_moments(spec: SystemSpec, samples: SampleSet,
                       budget: int | None = None) -> ExhaustiveMoments:
    """Exact mean and second moment over every admissible index vector."""
    if samples.m != spec.m:
        raise ValueError(
            f"system takes {spec.m} arguments but samples bind {samples.m}")
    total = samples.admissible_count()
    s1 = 0.0
    s2 = 0.0
    chunk: list[tuple[int, ...]] = []

    def flush():
        nonlocal s1, s2
        if not chunk:
            return
        vals = evaluate_batch(spec, samples.values_matrix(np.array(chunk)))
        s1 += float(vals.sum())
        s2 += float(np.square(vals).sum())
        chunk.clear()

    for vec in samples.enumerate_index_vectors(budget):
        chunk.append(vec)
        if len(chunk) >= 100_000:
            flush()
    flush()
    return ExhaustiveMoments(mu=s1 / total, mu2=s2 / total, count=total)


def exhaustive_theta(spec: SystemSpec, samples: SampleSet,
                     budget: int | None = None) -> float:
    """Exact value the resampling estimate is unbiased for, given the data."""
    return exhaustive_moments(spec, samples, budget).mu
