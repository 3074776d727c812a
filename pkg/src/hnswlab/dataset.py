"""The Dataset container: a dense vector matrix with stable integer ids."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np


@dataclass
class Dataset:
    """Immutable-by-convention collection of vectors keyed by integer id.

    Args:
        vectors: (n, d) float array; stored as float64.
        ids: (n,) unique integer ids; defaults to 0..n-1.
        categories: optional id -> label map covering any subset of ids.
    """

    vectors: np.ndarray
    ids: np.ndarray = None
    categories: dict[int, str] | None = field(default=None)

    def __post_init__(self):
        self.vectors = np.ascontiguousarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2 or self.vectors.shape[0] == 0:
            raise ValueError(
                f"vectors must be a non-empty (n, d) matrix, got shape {self.vectors.shape}"
            )
        if not np.all(np.isfinite(self.vectors)):
            raise ValueError("vectors contain NaN or Inf")
        if self.ids is None:
            self.ids = np.arange(len(self.vectors), dtype=np.int64)
        else:
            self.ids = np.asarray(self.ids, dtype=np.int64)
            if self.ids.shape != (len(self.vectors),):
                raise ValueError("ids must be one per vector")
            if len(np.unique(self.ids)) != len(self.ids):
                raise ValueError("ids must be unique")
        self._row_of_id = None

    def __len__(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def row_of(self, id_: int) -> int:
        """Row index of a given id."""
        if self._row_of_id is None:
            self._row_of_id = {int(i): r for r, i in enumerate(self.ids)}
        try:
            return self._row_of_id[int(id_)]
        except KeyError:
            raise KeyError(f"id {id_} not in dataset") from None

    def vector(self, id_: int) -> np.ndarray:
        return self.vectors[self.row_of(id_)]

    def content_hash(self) -> str:
        """SHA-256 over shape, vector payload, and ids; stable across runs."""
        h = hashlib.sha256()
        h.update(np.asarray(self.vectors.shape, dtype=np.int64).tobytes())
        h.update(self.vectors.tobytes())
        h.update(self.ids.tobytes())
        return h.hexdigest()
