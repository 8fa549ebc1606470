"""Team-composition statistics shared by the generator and the extractor.

The synthetic effect function and the feature extractor must agree exactly on
what e.g. "team history" means, so both import these definitions.
"""
from __future__ import annotations

from itertools import combinations
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "sample_mean_sd",
    "age_diversity",
    "hometown_diversity",
    "hometown_homophily",
    "region_homophily",
    "team_history",
]


def sample_mean_sd(values: np.ndarray) -> tuple[float, float]:
    """Mean and sample standard deviation (n-1 denominator; 0 when n < 2)."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        return 0.0, 0.0
    mean = float(values.mean())
    sd = float(values.std(ddof=1)) if values.size > 1 else 0.0
    return mean, sd


def age_diversity(ages: Sequence[float]) -> float:
    """Sample standard deviation of member ages."""
    return sample_mean_sd(np.asarray(ages, dtype=np.float64))[1]


def hometown_diversity(hometowns: Sequence[str]) -> float:
    """1 minus the share of the most common hometown on the team."""
    if not hometowns:
        return 0.0
    counts: dict[str, int] = {}
    for h in hometowns:
        counts[h] = counts.get(h, 0) + 1
    return 1.0 - max(counts.values()) / len(hometowns)


def hometown_homophily(focal_hometown: str, teammate_hometowns: Sequence[str]) -> float:
    """Share of teammates who share the focal driver's hometown."""
    if not teammate_hometowns:
        return 0.0
    same = sum(1 for h in teammate_hometowns if h == focal_hometown)
    return same / len(teammate_hometowns)


def region_homophily(regions: Sequence[str]) -> float:
    """Mean over unordered member pairs of the same-activity-region indicator."""
    if len(regions) < 2:
        return 0.0
    same = sum(1 for a, b in combinations(regions, 2) if a == b)
    n_pairs = len(regions) * (len(regions) - 1) // 2
    return same / n_pairs


def team_history(member_ids: Sequence[str], pair_counts: Mapping[tuple[str, str], int]) -> float:
    """Mean over unordered member pairs of past co-team contest counts.

    ``pair_counts`` maps sorted (id_a, id_b) pairs to the number of prior
    contests in which the pair were teammates; absent pairs count 0.
    """
    if len(member_ids) < 2:
        return 0.0
    total = 0
    n_pairs = 0
    for a, b in combinations(sorted(member_ids), 2):
        total += pair_counts.get((a, b), 0)
        n_pairs += 1
    return total / n_pairs
