"""Exact brute-force top-k retrieval: the ground-truth oracle for recall.

All distances are computed in float64. For L2 the fast norm-expansion pass
only nominates candidates; candidate distances are then recomputed from the
literal difference vectors, so ranking and tie-breaking (ascending id) are
exact even for duplicate points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .vecmath import Metric

# Relative candidate margin; orders of magnitude above worst-case float64
# error of the norm-expansion trick (~1e-13 of the squared-norm scale).
_CAND_MARGIN = 1e-9


@dataclass
class SearchResult:
    """Top-k ids (best first) with their distances."""

    ids: np.ndarray
    distances: np.ndarray

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)
        self.distances = np.asarray(self.distances, dtype=np.float64)
        if self.ids.shape != self.distances.shape:
            raise ValueError("ids and distances must align")


def _metric_scores(X: np.ndarray, sqn: np.ndarray, Q: np.ndarray, metric: Metric):
    """(len(Q), len(X)) score matrix; smaller = closer. L2 scores are squared."""
    G = Q @ X.T
    if metric is Metric.L2:
        qn = np.einsum("ij,ij->i", Q, Q)
        return np.maximum(sqn[None, :] - 2.0 * G + qn[:, None], 0.0)
    if metric is Metric.COSINE:
        xn = np.sqrt(sqn)
        if np.any(xn == 0.0):
            raise ValueError("cosine metric is undefined for zero vectors in the dataset")
        qn = np.sqrt(np.einsum("ij,ij->i", Q, Q))
        if np.any(qn == 0.0):
            raise ValueError("cosine metric is undefined for zero query vectors")
        return 1.0 - G / (xn[None, :] * qn[:, None])
    return -G


def _topk_rows(
    X: np.ndarray,
    ids: np.ndarray,
    sqn: np.ndarray,
    q: np.ndarray,
    scores: np.ndarray,
    k: int,
    metric: Metric,
    skip_row: int = -1,
):
    """Rows of the k best scores, ordered by (distance, ascending id).

    L2 scores from the norm expansion may carry cancellation error, so every
    row within a data-scaled margin of the k-th score is re-scored from the
    literal difference vector before the final ranking.
    """
    n = scores.shape[0]
    if 0 <= skip_row < n:
        scores[skip_row] = np.inf
        avail = n - 1
    else:
        avail = n
    kk = min(k, avail)
    if kk < avail:
        kth = np.partition(scores, kk - 1)[kk - 1]
        if metric is Metric.L2:
            margin = _CAND_MARGIN * (1.0 + sqn.max() + float(q @ q))
        else:
            margin = 0.0
        cand = np.flatnonzero(scores <= kth + margin)
    else:
        cand = np.flatnonzero(np.isfinite(scores)) if avail < n else np.arange(n)
    if metric is Metric.L2:
        diff = X[cand] - q
        d = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    else:
        d = scores[cand]
    order = np.lexsort((ids[cand], d))[:kk]
    return cand[order], d[order]


def exact_search(X: Dataset, q, k: int, metric: Metric = Metric.L2) -> SearchResult:
    """The k nearest points of q under the metric, ties broken by ascending id.

    Returns all points ranked when the dataset holds fewer than k.
    """
    q = np.asarray(q, dtype=np.float64)
    if k < 1:
        raise ValueError(f"need k >= 1, got {k}")
    if q.shape != (X.dim,):
        raise ValueError(f"query dimension {q.shape} does not match dataset dim {X.dim}")
    metric = Metric(metric)
    sqn = np.einsum("ij,ij->i", X.vectors, X.vectors)
    scores = _metric_scores(X.vectors, sqn, q[None, :], metric)[0]
    rows, dists = _topk_rows(X.vectors, X.ids, sqn, q, scores, k, metric)
    return SearchResult(X.ids[rows], dists)


def exact_search_batch(
    X: Dataset, Q: Dataset, k: int, metric: Metric = Metric.L2, block: int = 256
) -> list[SearchResult]:
    """exact_search for every query row of Q, in Q's order."""
    if k < 1:
        raise ValueError(f"need k >= 1, got {k}")
    if Q.dim != X.dim:
        raise ValueError(f"query dim {Q.dim} does not match dataset dim {X.dim}")
    metric = Metric(metric)
    sqn = np.einsum("ij,ij->i", X.vectors, X.vectors)
    out: list[SearchResult] = []
    for start in range(0, len(Q), block):
        qb = Q.vectors[start : start + block]
        scores = _metric_scores(X.vectors, sqn, qb, metric)
        for i in range(qb.shape[0]):
            rows, dists = _topk_rows(X.vectors, X.ids, sqn, qb[i], scores[i], k, metric)
            out.append(SearchResult(X.ids[rows], dists))
    return out


def self_neighbour_distances(
    X: Dataset, k: int, metric: Metric = Metric.L2, block: int = 256
) -> tuple[np.ndarray, np.ndarray]:
    """For each point: distances and ids of its k nearest other points.

    Ascending distance, ties by ascending id, the point itself excluded.
    Returns (distances (n, k), neighbour_ids (n, k)).
    """
    n = len(X)
    if n <= k:
        raise ValueError(f"need more than k={k} points, got {n}")
    metric = Metric(metric)
    sqn = np.einsum("ij,ij->i", X.vectors, X.vectors)
    dists = np.empty((n, k), dtype=np.float64)
    nbrs = np.empty((n, k), dtype=np.int64)
    for start in range(0, n, block):
        qb = X.vectors[start : start + block]
        scores = _metric_scores(X.vectors, sqn, qb, metric)
        for i in range(qb.shape[0]):
            rows, d = _topk_rows(
                X.vectors, X.ids, sqn, qb[i], scores[i], k, metric, skip_row=start + i
            )
            dists[start + i] = d
            nbrs[start + i] = X.ids[rows]
    return dists, nbrs
