"""
Order statistics shared by annotation and metrics.

Percentiles use the nearest-rank definition: the smallest value whose rank
reaches ``ceil(p/100 · n)``.
"""

import math
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np


def nearest_rank_percentile(values: Sequence[float], percentile: float) -> float:
    if not values:
        raise ValueError("percentile of an empty sequence")
    if not 0 <= percentile <= 100:
        raise ValueError(f"percentile {percentile} outside [0, 100]")
    ordered = sorted(values)
    rank = max(1, math.ceil(percentile / 100.0 * len(ordered)))
    return float(ordered[rank - 1])


def nearest_rank_percentiles(values: Sequence[float], percentiles: Iterable[float]) -> Dict[float, float]:
    return {p: nearest_rank_percentile(values, p) for p in percentiles}


def midpoint_median(values: Sequence[float]) -> float:
    """Median with even counts resolved to the mean of the two central values."""
    if len(values) == 0:
        raise ValueError("median of an empty sequence")
    return float(np.median(np.asarray(values, dtype=np.float64)))


def sample_sd(values: Sequence[float]) -> float:
    if len(values) < 2:
        return 0.0
    return float(np.std(np.asarray(values, dtype=np.float64), ddof=1))


def empirical_cdf(values: Sequence[float]) -> List[Tuple[float, float]]:
    """Step points of the empirical CDF, one per distinct value, ending at 1."""
    ordered = sorted(values)
    n = len(ordered)
    points: List[Tuple[float, float]] = []
    for i, value in enumerate(ordered, 1):
        if points and points[-1][0] == value:
            points[-1] = (value, i / n)
        else:
            points.append((float(value), i / n))
    return points
