"""
Nonparametric rank tests: Wilcoxon rank-sum (Mann-Whitney U) and Jonckheere-Terpstra
"""
from typing import NamedTuple

import numpy as np
from scipy.stats import norm, rankdata

from chromalex.validation import squeeze_and_check

EXACT_MAX_SIZE = 20


class RankTestResult(NamedTuple):
    statistic: float
    pvalue: float


def _tie_term(values):
    _, counts = np.unique(values, return_counts=True)
    return counts


def _exact_rank_sum_counts(doubled_ranks, n_a):
    """Number of size-`n_a` subsets of the ranks reaching each doubled rank sum."""
    total = int(np.sum(doubled_ranks))
    counts = np.zeros((n_a + 1, total + 1), dtype=np.float64)
    counts[0, 0] = 1.0
    for r in doubled_ranks:
        counts[1:, r:] = counts[1:, r:] + counts[:-1, :total + 1 - r]
    return counts[n_a]


def wilcoxon_rank_sum(a, b):
    """
    Two-sided Wilcoxon rank-sum test with midranks for ties
    Both samples of size <= 20 use the exact permutation distribution of the observed
    midranks; larger samples use the normal approximation with tie and continuity corrections.
    :param a: First sample
    :param b: Second sample
    :return: RankTestResult(U of `a`, two-sided p-value)
    """
    a, b = squeeze_and_check(a), squeeze_and_check(b)
    n_a, n_b = a.size, b.size
    ranks = rankdata(np.concatenate((a, b)))
    rank_sum = float(np.sum(ranks[:n_a]))
    u = rank_sum - n_a * (n_a + 1) / 2.0
    if n_a <= EXACT_MAX_SIZE and n_b <= EXACT_MAX_SIZE:
        doubled = np.rint(2.0 * ranks).astype(np.int64)
        counts = _exact_rank_sum_counts(doubled, n_a)
        observed = int(np.rint(2.0 * rank_sum))
        total = np.sum(counts)
        lower = np.sum(counts[:observed + 1]) / total
        upper = np.sum(counts[observed:]) / total
        return RankTestResult(u, float(min(1.0, 2.0 * min(lower, upper))))
    n = n_a + n_b
    ties = _tie_term(ranks)
    variance = n_a * n_b / 12.0 * ((n + 1) - np.sum(ties ** 3 - ties) / (n * (n - 1)))
    if variance <= 0.0:
        return RankTestResult(u, 1.0)
    z = max(abs(u - n_a * n_b / 2.0) - 0.5, 0.0) / np.sqrt(variance)
    return RankTestResult(u, float(min(1.0, 2.0 * norm.sf(z))))


def jonckheere_terpstra(groups):
    """
    Jonckheere-Terpstra test for an increasing trend across ordered groups
    :param groups: List of at least 3 non-empty samples, in hypothesized increasing order
    :return: RankTestResult(JT, one-sided p-value from the tie-corrected normal approximation)
    """
    if len(groups) < 3:
        raise ValueError(f'the test needs >= 3 ordered groups (not {len(groups)}).')
    groups = [squeeze_and_check(g) for g in groups]
    statistic = 0.0
    for i, lower in enumerate(groups):
        for upper in groups[i + 1:]:
            upper = np.sort(upper)
            left = np.searchsorted(upper, lower, side='left')
            right = np.searchsorted(upper, lower, side='right')
            statistic += float(np.sum(upper.size - right) + 0.5 * np.sum(right - left))
    sizes = np.array([g.size for g in groups], dtype=np.float64)
    n = float(np.sum(sizes))
    ties = _tie_term(np.concatenate(groups)).astype(np.float64)
    mean = (n * n - np.sum(sizes ** 2)) / 4.0
    variance = ((n * (n - 1) * (2 * n + 5) - np.sum(sizes * (sizes - 1) * (2 * sizes + 5))
                 - np.sum(ties * (ties - 1) * (2 * ties + 5))) / 72.0
                + np.sum(sizes * (sizes - 1) * (sizes - 2)) * np.sum(ties * (ties - 1) * (ties - 2))
                / (36.0 * n * (n - 1) * (n - 2))
                + np.sum(sizes * (sizes - 1)) * np.sum(ties * (ties - 1)) / (8.0 * n * (n - 1)))
    if variance <= 1e-12:
        return RankTestResult(statistic, 1.0)
    return RankTestResult(statistic, float(norm.sf((statistic - mean) / np.sqrt(variance))))
