"""Synthetic datasets of prescribed intrinsic dimensionality.

Vectors are random linear combinations of an orthonormal basis: a dataset
built from k basis vectors of R^d has numerical rank k regardless of d.
All randomness comes from numpy's default PCG64 generator, so outputs are
deterministic per seed within this build.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .errors import RankDeficiencyError
from .vecmath import gram_schmidt

_MAX_REDRAWS = 16


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for one synthetic dataset: n vectors in R^d spanning k directions."""

    d: int
    k: int
    n: int
    seed: int

    def __post_init__(self):
        if not (1 <= self.k <= self.d):
            raise ValueError(f"need 1 <= k <= d, got k={self.k}, d={self.d}")
        if self.n < 1:
            raise ValueError(f"need n >= 1, got n={self.n}")


def generate_basis(d: int, k: int, seed: int) -> np.ndarray:
    """Draw k standard-normal d-vectors and orthonormalize them.

    Rank-deficient draws (vanishing residual) are redrawn row by row, up to
    _MAX_REDRAWS times; for k <= d this is practically unreachable.
    """
    if not (1 <= k <= d):
        raise ValueError(f"need 1 <= k <= d, got k={k}, d={d}")
    rng = np.random.default_rng(seed)
    V = rng.standard_normal((k, d))
    for attempt in range(_MAX_REDRAWS + 1):
        try:
            return gram_schmidt(V)
        except RankDeficiencyError as e:
            if attempt == _MAX_REDRAWS:
                raise RankDeficiencyError(e.row, e.norm) from e
            V[e.row] = rng.standard_normal(d)
    raise AssertionError("unreachable")


def generate_dataset(U: np.ndarray, n: int, seed: int) -> Dataset:
    """n random combinations of the orthonormal rows of U, ids 0..n-1.

    Coefficients are i.i.d. standard normal, so every basis direction carries
    equal variance and the PCA spectrum of the result is flat over k components.
    """
    U = np.asarray(U, dtype=np.float64)
    if U.ndim != 2:
        raise ValueError(f"basis must be a (k, d) matrix, got shape {U.shape}")
    if n < 1:
        raise ValueError(f"need n >= 1, got n={n}")
    rng = np.random.default_rng(seed)
    C = rng.standard_normal((n, U.shape[0]))
    return Dataset(C @ U)


def generate_query_set(U: np.ndarray, n_q: int, seed: int) -> Dataset:
    """Query vectors drawn from the same basis; pass a seed independent of the data's."""
    return generate_dataset(U, n_q, seed)


def dataset_from_spec(spec: SynthSpec) -> Dataset:
    """Basis + coefficients in one step; basis and coefficient seeds are split."""
    basis_seed, coeff_seed = split_seed(spec.seed, 2)
    U = generate_basis(spec.d, spec.k, basis_seed)
    return generate_dataset(U, spec.n, coeff_seed)


def split_seed(seed: int, count: int) -> list[int]:
    """Derive `count` independent 63-bit child seeds from one parent seed."""
    ss = np.random.SeedSequence(seed)
    return [int(s) for s in ss.generate_state(count, dtype=np.uint64) >> np.uint64(1)]
