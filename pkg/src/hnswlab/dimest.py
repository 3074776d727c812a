"""Intrinsic dimensionality estimators.

Global estimate: the number of principal components needed to reach a
cumulative explained-variance threshold. Pointwise estimate: maximum
likelihood over the distances to each point's exact nearest neighbours,
m(x) = [ 1/(k-1) * sum_{j<k} ln(T_k/T_j) ]^-1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset
from .knn import self_neighbour_distances
from .vecmath import Metric

DEFAULT_THETA = 0.99
DEFAULT_LID_NEIGHBOURS = 100

# Zero distances are lifted to this fraction of T_k before taking logs.
_LID_EPS = 1e-12


@dataclass
class PcaReport:
    """Explained-variance spectrum and the threshold crossing point."""

    explained_variance_ratios: np.ndarray
    cumulative: np.ndarray
    k_intrinsic: int
    theta: float


@dataclass
class LidProfile:
    """Per-point local intrinsic dimensionality over exact k-NN distances.

    Degenerate points (all neighbour distances equal, including the
    all-duplicates case) carry the +inf sentinel rather than a number.
    """

    k_neighbours: int
    ids: np.ndarray
    lid: np.ndarray
    neighbour_distances: np.ndarray
    metric: Metric
    sentinel_count: int = field(init=False)

    def __post_init__(self):
        self.sentinel_count = int(np.isinf(self.lid).sum())

    def lid_of(self, id_: int) -> float:
        row = int(np.flatnonzero(self.ids == id_)[0])
        return float(self.lid[row])


def _variance_spectrum(vectors: np.ndarray) -> np.ndarray:
    """Descending explained-variance ratios of the mean-centered matrix.

    Singular values below the numerical-rank tolerance are treated as exact
    zeros, so rank-deficient data yields a spectrum that truly ends.
    """
    centered = vectors - vectors.mean(axis=0)
    s = np.linalg.svd(centered, compute_uv=False)
    if s[0] == 0.0:
        raise ValueError("zero variance: all rows are identical")
    tol = max(centered.shape) * np.finfo(np.float64).eps * s[0]
    s = np.where(s > tol, s, 0.0)
    var = s * s
    return var / var.sum()


def pca_intrinsic_dim(X: Dataset | np.ndarray, theta: float = DEFAULT_THETA) -> PcaReport:
    """Smallest component count whose cumulative explained variance reaches theta."""
    vectors = X.vectors if isinstance(X, Dataset) else np.asarray(X, dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[0] < 2:
        raise ValueError(f"need at least 2 rows, got shape {vectors.shape}")
    if not (0.0 < theta <= 1.0):
        raise ValueError(f"theta must be in (0, 1], got {theta}")
    ratios = _variance_spectrum(vectors)
    cumulative = np.minimum(np.cumsum(ratios), 1.0)
    rank = int(np.count_nonzero(ratios))
    # The spectrum is exactly exhausted at its rank; pin the tail so that
    # theta = 1.0 never falls victim to cumsum rounding.
    cumulative[rank - 1 :] = 1.0
    k_intrinsic = int(np.argmax(cumulative >= theta)) + 1
    return PcaReport(ratios, cumulative, k_intrinsic, theta)


def lid_mle(T, k: int | None = None) -> float:
    """MLE local intrinsic dimensionality from ascending neighbour distances.

    T must hold the k nearest-neighbour distances in ascending order. Zero
    distances among T_1..T_{k-1} are clamped to _LID_EPS * T_k; if all
    distances are equal the estimate diverges and +inf is returned.
    """
    T = np.asarray(T, dtype=np.float64)
    if T.ndim != 1 or T.shape[0] < 2:
        raise ValueError(f"need at least 2 distances, got shape {T.shape}")
    if k is not None and k != T.shape[0]:
        raise ValueError(f"k={k} does not match {T.shape[0]} distances")
    if np.any(np.diff(T) < 0):
        raise ValueError("distances must be ascending")
    tk = T[-1]
    if tk <= 0.0:
        raise ValueError("largest neighbour distance is zero (duplicate-saturated point)")
    tj = np.maximum(T[:-1], _LID_EPS * tk)
    s = float(np.log(tk / tj).sum()) / (T.shape[0] - 1)
    if s == 0.0:
        return float("inf")
    return 1.0 / s


def lid_profile(
    X: Dataset,
    k_neighbours: int = DEFAULT_LID_NEIGHBOURS,
    metric: Metric = Metric.L2,
) -> LidProfile:
    """Pointwise LID for every point, from exact (brute-force) neighbours.

    Neighbour ties are broken by ascending id, so the profile is a pure
    function of the data. Points whose k-th neighbour distance is zero are
    assigned the +inf sentinel (counted in sentinel_count) instead of
    failing the whole profile.
    """
    if len(X) <= k_neighbours:
        raise ValueError(
            f"dataset of {len(X)} points is too small for {k_neighbours} neighbours"
        )
    metric = Metric(metric)
    dists, _ = self_neighbour_distances(X, k_neighbours, metric)
    tk = dists[:, -1]
    lid = np.full(len(X), np.inf)
    ok = tk > 0.0
    if np.any(ok):
        tj = np.maximum(dists[ok, :-1], _LID_EPS * tk[ok, None])
        s = np.log(tk[ok, None] / tj).sum(axis=1) / (k_neighbours - 1)
        with np.errstate(divide="ignore"):
            lid[ok] = np.where(s > 0.0, 1.0 / s, np.inf)
    return LidProfile(k_neighbours, X.ids.copy(), lid, dists, metric)


def per_category_intrinsic_dim(
    X: Dataset, categories: dict[int, str], theta: float = DEFAULT_THETA
) -> tuple[dict[str, PcaReport], PcaReport]:
    """PcaReport per category plus one for the whole dataset.

    Every id must be labeled and every category must contain at least two
    rows; offenders are named in the error.
    """
    missing = [int(i) for i in X.ids if int(i) not in categories]
    if missing:
        raise ValueError(f"ids without a category label: {missing[:10]}")
    rows_by_cat: dict[str, list[int]] = {}
    for row, id_ in enumerate(X.ids):
        rows_by_cat.setdefault(categories[int(id_)], []).append(row)
    small = sorted(c for c, rows in rows_by_cat.items() if len(rows) < 2)
    if small:
        raise ValueError(f"categories with fewer than 2 points: {small}")
    reports = {
        cat: pca_intrinsic_dim(X.vectors[rows], theta)
        for cat, rows in sorted(rows_by_cat.items())
    }
    return reports, pca_intrinsic_dim(X.vectors, theta)
