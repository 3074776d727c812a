"""Dense vector primitives: dot products, distances, Gram-Schmidt orthonormalization."""

from __future__ import annotations

from enum import Enum

import numpy as np

from .errors import RankDeficiencyError

# Residual norm below this is treated as linear dependence.
RANK_TOLERANCE = 1e-10


class Metric(str, Enum):
    L2 = "l2"
    COSINE = "cosine"
    INNER_PRODUCT = "ip"


def _as_vector(a, name: str = "vector") -> np.ndarray:
    v = np.asarray(a, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-d array, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains NaN or Inf")
    return v


def dot(a, b) -> float:
    """Inner product of two equal-dimension vectors."""
    va, vb = _as_vector(a, "a"), _as_vector(b, "b")
    if va.shape != vb.shape:
        raise ValueError(f"dimension mismatch: {va.shape[0]} vs {vb.shape[0]}")
    return float(np.dot(va, vb))


def norm(a) -> float:
    """Euclidean norm."""
    v = _as_vector(a)
    return float(np.sqrt(np.dot(v, v)))


def distance(a, b, metric: Metric = Metric.L2) -> float:
    """Distance under the given metric; smaller always means more similar.

    L2 is the Euclidean distance, COSINE is 1 - cos(a, b), and INNER_PRODUCT
    is the negated dot product (not a true metric, but orders correctly).
    """
    va, vb = _as_vector(a, "a"), _as_vector(b, "b")
    if va.shape != vb.shape:
        raise ValueError(f"dimension mismatch: {va.shape[0]} vs {vb.shape[0]}")
    metric = Metric(metric)
    if metric is Metric.L2:
        diff = va - vb
        return float(np.sqrt(np.dot(diff, diff)))
    if metric is Metric.COSINE:
        na = np.sqrt(np.dot(va, va))
        nb = np.sqrt(np.dot(vb, vb))
        if na == 0.0 or nb == 0.0:
            raise ValueError("cosine distance is undefined for zero vectors")
        return float(1.0 - np.dot(va, vb) / (na * nb))
    return float(-np.dot(va, vb))


def gram_schmidt(V) -> np.ndarray:
    """Orthonormalize the rows of a k x d matrix (k <= d).

    Implements the classical recursion w_i = v_i - sum_j proj_{u_j}(v_i),
    u_i = w_i / ||w_i||, with a second orthogonalization pass per row for
    numerical stability. Raises RankDeficiencyError (naming the row) when a
    residual norm falls below RANK_TOLERANCE.
    """
    M = np.asarray(V, dtype=np.float64)
    if M.ndim != 2 or M.size == 0:
        raise ValueError(f"expected a non-empty 2-d matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix contains NaN or Inf")
    k, d = M.shape
    if k > d:
        raise ValueError(f"cannot orthonormalize {k} rows in {d} dimensions")
    U = np.empty_like(M)
    for i in range(k):
        w = M[i].copy()
        # Two projection passes: re-orthogonalization keeps |<u_i, u_j>| at
        # rounding level even for nearly-dependent inputs.
        for _ in range(2):
            if i:
                w -= U[:i].T @ (U[:i] @ w)
        wn = np.sqrt(np.dot(w, w))
        if wn < RANK_TOLERANCE:
            raise RankDeficiencyError(i, wn)
        U[i] = w / wn
    return U
