"""Retrieval quality measures: recall@k, NDCG@k, leaderboard rank shifts, Pearson r."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

Qrels = dict[str, dict[str, int]]


@dataclass
class EvalSummary:
    """Per-query values and their means for one evaluation cell."""

    k: int
    per_query_recall: np.ndarray
    mean_recall_at_k: float
    per_query_ndcg: np.ndarray | None = None
    mean_ndcg_at_k: float | None = None
    ndcg_skipped_queries: int = 0


def _top_ids(result, k: int) -> list:
    ids = result.ids if hasattr(result, "ids") else result
    return list(ids)[:k]


def recall_at_k(approx, exact, k: int) -> float:
    """Fraction of the exact top-k also present in the approximate top-k.

    Accepts SearchResults or plain id sequences; only set membership of the
    first k entries matters.
    """
    exact_ids = set(_top_ids(exact, k))
    if not exact_ids:
        raise ValueError("exact result set is empty")
    approx_ids = set(_top_ids(approx, k))
    return len(approx_ids & exact_ids) / len(exact_ids)


def mean_recall(values) -> float:
    """Arithmetic mean of per-query recall values."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("no queries to average over")
    return float(values.mean())


def ndcg_at_k(ranked_ids, qrels_for_query: dict, k: int, exponential: bool = False) -> float:
    """Normalised discounted cumulative gain of a ranking at cutoff k.

    Linear gain with a log2(rank+1) discount by default (the pytrec-eval
    convention); pass exponential=True for the 2^rel - 1 gain variant.
    Returns 0.0 when the query has no relevant documents.
    """
    if k < 1:
        raise ValueError(f"need k >= 1, got {k}")
    grades = sorted((int(g) for g in qrels_for_query.values()), reverse=True)
    if any(g < 0 for g in grades):
        raise ValueError("relevance grades must be >= 0")

    def gain(g: int) -> float:
        return float(2**g - 1) if exponential else float(g)

    ideal = sum(gain(g) / math.log2(i + 2) for i, g in enumerate(grades[:k]))
    if ideal == 0.0:
        return 0.0
    dcg = sum(
        gain(qrels_for_query.get(doc, 0)) / math.log2(i + 2)
        for i, doc in enumerate(list(ranked_ids)[:k])
    )
    return dcg / ideal


def has_relevant(qrels_for_query: dict) -> bool:
    return any(int(g) > 0 for g in qrels_for_query.values())


def rank_change(
    scores_exact: dict[str, float], scores_approx: dict[str, float]
) -> dict[str, int]:
    """Leaderboard movement per key: rank under exact minus rank under approx.

    Ranks are 1-based, descending by score, ties broken by key. Positive
    delta means the key moved up the board under the approximate scores.
    """
    if set(scores_exact) != set(scores_approx):
        raise ValueError("score maps must share the same keys")
    if not scores_exact:
        raise ValueError("score maps are empty")

    def ranks(scores: dict[str, float]) -> dict[str, int]:
        board = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
        return {name: i + 1 for i, (name, _) in enumerate(board)}

    re_, ra = ranks(scores_exact), ranks(scores_approx)
    return {name: re_[name] - ra[name] for name in scores_exact}


def pearson(xs, ys) -> float:
    """Sample Pearson correlation coefficient."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("inputs must be 1-d and equal length")
    if x.size < 2:
        raise ValueError("need at least 2 points")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = float(np.sqrt(np.dot(dx, dx)))
    sy = float(np.sqrt(np.dot(dy, dy)))
    if sx == 0.0 or sy == 0.0:
        raise ValueError("zero variance input")
    r = float(np.dot(dx, dy) / (sx * sy))
    return max(-1.0, min(1.0, r))


def summarize(
    per_query_recall,
    k: int,
    per_query_ndcg=None,
    ndcg_skipped_queries: int = 0,
) -> EvalSummary:
    recall = np.asarray(per_query_recall, dtype=np.float64)
    ndcg = None if per_query_ndcg is None else np.asarray(per_query_ndcg, dtype=np.float64)
    return EvalSummary(
        k=k,
        per_query_recall=recall,
        mean_recall_at_k=mean_recall(recall),
        per_query_ndcg=ndcg,
        mean_ndcg_at_k=None if ndcg is None or ndcg.size == 0 else float(ndcg.mean()),
        ndcg_skipped_queries=ndcg_skipped_queries,
    )
