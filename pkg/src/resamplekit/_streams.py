"""Deterministic substream derivation for all stochastic operations.

Every randomized routine in the package is keyed by an integer seed plus a
tuple of non-negative integers (a "lane" constant per routine, then block
indices).  Streams are Philox counter-based generators derived through
``numpy.random.SeedSequence`` spawn keys, so the same (seed, key) always
yields the same draws regardless of execution order or thread count.

Long runs are split into fixed blocks of :data:`BLOCK` units; block ``b`` of a
computation uses the substream keyed ``(*key, b)``.  Assembling results in
block order makes output independent of how blocks were scheduled.
"""

from __future__ import annotations

import numpy as np

# Number of realizations (or replications) handled per substream block.
BLOCK = 4096


class Lane:
    """Distinct stream lanes, one per stochastic operation in the package."""

    SIMPLE_ESTIMATE = 1
    WAVE = 2
    MIXED_MOMENT = 3
    KNOWN_G = 4
    INNER_MC = 5
    VECTOR_WAVE = 6
    DAMAGE_RESAMPLE = 7
    DAMAGE_OUTER = 8
    RENEWAL_ESTIMATE = 9
    RENEWAL_PLUGIN = 10
    COVERAGE_MC = 11
    COVERAGE_INTERVAL = 12


def substream(seed: int, *key: int) -> np.random.Generator:
    """Return an independent generator keyed by ``(seed, *key)``.

    Parameters
    ----------
    seed : int
        User-facing run seed (non-negative).
    *key : int
        Non-negative integers identifying the lane/block.
    """
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    ss = np.random.SeedSequence(entropy=int(seed),
                                spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def block_ranges(total: int, block: int = BLOCK):
    """Yield ``(index, start, stop)`` triples covering ``range(total)``."""
    b = 0
    start = 0
    while start < total:
        stop = min(start + block, total)
        yield b, start, stop
        b += 1
        start = stop
