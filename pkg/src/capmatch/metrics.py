"""Ranking metrics: precision at k and average precision.

P@k keeps a fixed denominator of k even when the ranking is shorter, which
is the definition retrieval baselines report against; small databases
therefore cap P@k below 1. AP is computed over the full ranking.
"""

import numpy as np

from .errors import NoRelevantError


def precision_at_k(ranked_relevance, k: int) -> float:
    """Fraction of the first k positions that are relevant, denominator k."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    rel = list(ranked_relevance)
    if not rel:
        raise ValueError("relevance list must be non-empty")
    return sum(bool(r) for r in rel[:k]) / k


def average_precision(ranked_relevance, total_relevant: int) -> float:
    """Mean of precision-at-hit over all relevant items.

    ``total_relevant`` is the number of relevant items in the ranked
    universe; positions use 1-based denominators.

    Raises:
        NoRelevantError: total_relevant is zero (callers skip such queries).
    """
    if total_relevant < 1:
        raise NoRelevantError("query has no relevant targets")
    rel = np.asarray(list(ranked_relevance), dtype=bool)
    if rel.size == 0:
        raise ValueError("relevance list must be non-empty")
    hits = np.flatnonzero(rel)
    cum = np.arange(1, hits.size + 1, dtype=np.float64)
    return float(np.sum(cum / (hits + 1)) / total_relevant)
