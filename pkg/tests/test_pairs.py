import itertools
import math

import numpy as np
import pytest
from scipy import stats

from resamplekit import (AlphaPair, BetaPair, BlockLayout, BudgetExceededError,
                         OmegaPair, SampleSet, alpha_probability, beta_probability,
                         conditional_mixed_moment, enumerate_pairs,
                         estimate_theta, exhaustive_moments, omega_probability,
                         pair_probability, resampling_variance)
from resamplekit.pairs import alpha_from_indices, beta_from_indices, omega_from_indices
from resamplekit.systems import evaluate

from helpers import var_se


def admissible_vectors(layout: BlockLayout):
    """All admissible 0-based index vectors, built directly from the layout."""
    per_block = [itertools.permutations(range(size), len(args))
                 for args, size in zip(layout.block_args, layout.block_sizes)]
    for combo in itertools.product(*per_block):
        vec = [0] * layout.m
        for args, picks in zip(layout.block_args, combo):
            for a, j in zip(args, picks):
                vec[a - 1] = j
        yield tuple(vec)


# -- omega ----------------------------------------------------------------

def test_omega_anchors():
    sizes = (3, 3, 3)
    assert omega_probability(OmegaPair(frozenset()), sizes) == pytest.approx(8 / 27)
    assert omega_probability(OmegaPair(frozenset({1, 2, 3})), sizes) == pytest.approx(1 / 27)
    ones = (1, 1, 1)
    assert omega_probability(OmegaPair(frozenset({1, 2, 3})), ones) == 1.0
    assert omega_probability(OmegaPair(frozenset({1})), ones) == 0.0


def test_omega_probability_counting_oracle():
    """Compare against exhaustive counting of coincidence patterns."""
    sizes = (2, 3, 4)
    vectors = list(itertools.product(*(range(n) for n in sizes)))
    counts: dict[frozenset, int] = {}
    for v, w in itertools.product(vectors, repeat=2):
        pat = frozenset(i + 1 for i in range(3) if v[i] == w[i])
        counts[pat] = counts.get(pat, 0) + 1
    total = len(vectors) ** 2
    for pat, c in counts.items():
        assert omega_probability(OmegaPair(pat), sizes) == pytest.approx(
            c / total, abs=1e-12)


# -- alpha ----------------------------------------------------------------

@pytest.mark.parametrize("n, m", [(4, 2), (7, 3), (10, 5), (6, 1)])
def test_alpha_single_block_hypergeometric(n, m):
    lay = BlockLayout(block_args=(tuple(range(1, m + 1)),), block_sizes=(n,))
    for a in range(m + 1):
        assert alpha_probability(AlphaPair((a,)), lay) == pytest.approx(
            stats.hypergeom.pmf(a, n, m, m), abs=1e-12)


def test_alpha_anchor_4_choose_2():
    lay = BlockLayout(block_args=((1, 2),), block_sizes=(4,))
    probs = [alpha_probability(AlphaPair((a,)), lay) for a in (0, 1, 2)]
    assert probs == [pytest.approx(1 / 6), pytest.approx(2 / 3), pytest.approx(1 / 6)]


def test_alpha_zero_overlap_impossible_when_tight():
    # two draws of 2 from 3 must share at least one element
    lay = BlockLayout(block_args=((1, 2),), block_sizes=(3,))
    assert alpha_probability(AlphaPair((0,)), lay) == 0.0


def test_alpha_counting_oracle():
    lay = BlockLayout(block_args=((1, 2), (3,)), block_sizes=(4, 2))
    vectors = list(admissible_vectors(lay))
    counts: dict[tuple, int] = {}
    for v, w in itertools.product(vectors, repeat=2):
        a1 = len({v[0], v[1]} & {w[0], w[1]})
        a2 = int(v[2] == w[2])
        counts[(a1, a2)] = counts.get((a1, a2), 0) + 1
    total = len(vectors) ** 2
    for alpha, c in counts.items():
        assert alpha_probability(AlphaPair(alpha), lay) == pytest.approx(
            c / total, abs=1e-12)


def test_alpha_simulation_oracle():
    """Without-replacement overlap frequencies follow the stated law."""
    lay = BlockLayout(block_args=((1, 2, 3),), block_sizes=(8,))
    rng = np.random.default_rng(17)
    draws = 20_000
    overlaps = np.array([
        len(set(rng.choice(8, 3, replace=False)) & set(rng.choice(8, 3, replace=False)))
        for _ in range(draws)])
    for a in range(4):
        p = alpha_probability(AlphaPair((a,)), lay)
        freq = float(np.mean(overlaps == a))
        se = math.sqrt(p * (1 - p) / draws)
        assert abs(freq - p) < 4 * se


# -- beta -----------------------------------------------------------------

def test_beta_worked_example():
    lay = BlockLayout(block_args=((1, 2), (3, 4, 5)), block_sizes=(5, 5))
    jq = np.array([4, 1, 2, 3, 1])
    jq2 = np.array([1, 2, 2, 4, 3])
    assert beta_from_indices(jq, jq2, lay) == BetaPair((0, 1, 3, 5, 0))
    assert alpha_from_indices(jq, jq2, lay) == AlphaPair((1, 2))


def test_beta_full_and_empty():
    lay = BlockLayout(block_args=((1,), (2,), (3,)), block_sizes=(4, 4, 4))
    v = np.array([1, 2, 3])
    assert beta_from_indices(v, v, lay) == BetaPair((1, 2, 3))
    assert beta_from_indices(v, np.array([2, 3, 1]), lay) == BetaPair((0, 0, 0))


def test_beta_counting_oracle():
    lay = BlockLayout(block_args=((1, 2), (3,)), block_sizes=(3, 2))
    vectors = list(admissible_vectors(lay))
    counts: dict[BetaPair, int] = {}
    for v, w in itertools.product(vectors, repeat=2):
        beta = []
        for args in lay.block_args:
            for i in args:
                hit = next((a for a in args if v[i - 1] == w[a - 1]), 0)
                beta.append(hit)
        key = BetaPair(tuple(beta))
        counts[key] = counts.get(key, 0) + 1
    total = len(vectors) ** 2
    assert sum(counts.values()) == total
    for beta, c in counts.items():
        assert beta_probability(beta, lay) == pytest.approx(c / total, abs=1e-12)


def test_beta_degenerates_to_omega():
    """With singleton blocks the beta support is the omega set."""
    lay = BlockLayout(block_args=((1,), (2,), (3,), (4,)), block_sizes=(3, 2, 5, 4))
    rng = np.random.default_rng(23)
    for _ in range(100):
        v = np.array([rng.integers(n) for n in lay.block_sizes])
        w = np.array([rng.integers(n) for n in lay.block_sizes])
        beta = beta_from_indices(v, w, lay)
        omega = omega_from_indices(v, w)
        assert frozenset(i + 1 for i, b in enumerate(beta.beta) if b) == omega.args
        assert beta_probability(beta, lay) == pytest.approx(
            omega_probability(omega, lay.sizes), abs=1e-14)


# -- enumeration and closure ----------------------------------------------

def test_enumerate_pairs_families():
    singleton = BlockLayout(block_args=((1,), (2,), (3,)), block_sizes=(3, 3, 3))
    omegas = enumerate_pairs(singleton)
    assert len(omegas) == 8
    assert all(isinstance(p, OmegaPair) for p, _ in omegas)

    blocked = BlockLayout(block_args=((1, 2), (3,)), block_sizes=(4, 2))
    alphas = enumerate_pairs(blocked)
    assert all(isinstance(p, AlphaPair) for p, _ in alphas)
    assert len(alphas) == 3 * 2  # (m1+1)(m2+1)

    betas = enumerate_pairs(blocked, family="beta")
    assert all(isinstance(p, BetaPair) for p, _ in betas)
    assert sum(pr for _, pr in betas) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("layout", [
    BlockLayout(block_args=((1,), (2,)), block_sizes=(5, 9)),
    BlockLayout(block_args=((1, 2, 3),), block_sizes=(7,)),
    BlockLayout(block_args=((1, 3), (2,), (4, 5)), block_sizes=(6, 3, 4)),
])
def test_pair_closure(layout):
    for family in ("auto", "beta"):
        table = enumerate_pairs(layout, family=family)
        assert sum(p for _, p in table) == pytest.approx(1.0, abs=1e-12)
        assert all(p >= 0 for _, p in table)


def test_pair_probability_dispatch():
    lay = BlockLayout(block_args=((1, 2), (3,)), block_sizes=(4, 3))
    assert pair_probability(AlphaPair((1, 0)), lay) == alpha_probability(AlphaPair((1, 0)), lay)
    assert pair_probability(BetaPair((0, 0, 0)), lay) == beta_probability(BetaPair((0, 0, 0)), lay)
    sing = BlockLayout(block_args=((1,), (2,)), block_sizes=(3, 3))
    assert pair_probability(OmegaPair(frozenset({1})), sing) == \
        omega_probability(OmegaPair(frozenset({1})), (3, 3))


def test_enumerate_pairs_budget():
    lay = BlockLayout(block_args=tuple((i,) for i in range(1, 25)),
                      block_sizes=(3,) * 24)
    with pytest.raises(BudgetExceededError):
        enumerate_pairs(lay, budget=1000)  # 2^24 omega pairs


# -- conditional mixed moments --------------------------------------------

def test_mixed_moment_full_coincidence_is_mu2(two_of_three, small_samples):
    mom = exhaustive_moments(two_of_three, small_samples)
    full = conditional_mixed_moment(two_of_three, small_samples,
                                    OmegaPair(frozenset({1, 2, 3})))
    assert full.value == pytest.approx(mom.mu2, abs=1e-14)
    assert full.method == "empirical-exact"


def test_mixed_moment_generator_empty_pair_is_mu_squared(two_of_three):
    """With fresh data per draw, disjoint resamples are truly independent."""
    from resamplekit import exponential
    dists = [exponential(1.0)] * 3
    layout = BlockLayout(block_args=((1,), (2,), (3,)), block_sizes=(4, 4, 4))
    p = math.exp(-1.0)
    theta = 3 * p**2 * (1 - p) + p**3
    mm = conditional_mixed_moment(two_of_three, dists, OmegaPair(frozenset()),
                                  layout=layout, seed=5, mc_draws=100_000)
    assert mm.se > 0
    assert abs(mm.value - theta**2) < 5 * mm.se


def test_mixed_moment_double_enumeration_oracle(two_of_three, small_samples):
    """mu11(omega) equals the brute-force average over constrained pairs."""
    vectors = list(itertools.product(range(3), repeat=3))
    vals = {v: evaluate(two_of_three, small_samples.values_matrix(np.array(v)[None, :])[0])
            for v in vectors}
    for omega in (frozenset(), frozenset({3}), frozenset({1, 2})):
        acc, cnt = 0.0, 0
        for v, w in itertools.product(vectors, repeat=2):
            pat = frozenset(i + 1 for i in range(3) if v[i] == w[i])
            if pat == omega:
                acc += vals[v] * vals[w]
                cnt += 1
        mm = conditional_mixed_moment(two_of_three, small_samples, OmegaPair(omega))
        assert mm.value == pytest.approx(acc / cnt, abs=1e-12)


def test_mixed_moment_recombines_to_mu_squared(two_of_three, small_samples):
    """Sum of P(omega) mu11(omega) over all pairs is mu^2 (independent draws)."""
    mom = exhaustive_moments(two_of_three, small_samples)
    total = 0.0
    for pat, p in enumerate_pairs(small_samples.layout):
        mm = conditional_mixed_moment(two_of_three, small_samples, pat)
        total += p * mm.value
    assert total == pytest.approx(mom.mu**2, abs=1e-12)


def test_mixed_moment_alpha_counting_oracle(two_of_three):
    """Alpha-conditioned moment vs direct counting on a shared-sample layout."""
    s = SampleSet.from_samples(
        [("p", [2.0, 0.5, 1.5]), ("c", [1.2, 0.1])],
        blocks={1: "p", 2: "p", 3: "c"})
    lay = s.layout
    vectors = list(admissible_vectors(lay))
    vals = {v: evaluate(two_of_three, s.values_matrix(np.array(v)[None, :])[0])
            for v in vectors}
    targets: dict[tuple, list] = {}
    for v, w in itertools.product(vectors, repeat=2):
        a = (len({v[0], v[1]} & {w[0], w[1]}), int(v[2] == w[2]))
        targets.setdefault(a, []).append(vals[v] * vals[w])
    for alpha, prods in targets.items():
        mm = conditional_mixed_moment(two_of_three, s, AlphaPair(alpha))
        assert mm.value == pytest.approx(float(np.mean(prods)), abs=1e-12)


def test_block_variance_vs_seeded_runs(two_of_three):
    """Alpha-family variance matches the spread of seeded runs, blocks included."""
    s = SampleSet.from_samples(
        [("p", [2.0, 0.5, 1.5]), ("c", [1.2, 0.1])],
        blocks={1: "p", 2: "p", 3: "c"})
    r = 4
    rep = resampling_variance(two_of_three, s, r=r)
    assert rep.mode == "empirical"
    assert sum(row.probability for row in rep.rows) == pytest.approx(1.0, abs=1e-12)
    estimates = np.array([
        estimate_theta(two_of_three, s, r=r, seed=s_).estimate
        for s_ in range(8000)])
    emp = float(np.var(estimates, ddof=1))
    assert abs(emp - rep.variance) < 4 * var_se(estimates)
