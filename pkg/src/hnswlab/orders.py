"""Insertion-order permutations: random, LID-sorted, category-sequenced."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from .dimest import LidProfile


class OrderStrategy(str, Enum):
    RANDOM = "random"
    LID_ASC = "lid_asc"
    LID_DESC = "lid_desc"
    CATEGORY = "category"


@dataclass
class OrderPlan:
    """A permutation of dataset ids plus the provenance that produced it."""

    ids: np.ndarray
    strategy: OrderStrategy
    seed: int | None = None
    detail: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)
        if self.ids.ndim != 1 or self.ids.size == 0:
            raise ValueError("order plan must hold a non-empty 1-d id sequence")
        if len(np.unique(self.ids)) != len(self.ids):
            raise ValueError("order plan ids contain duplicates")

    def covers(self, dataset_ids: np.ndarray) -> bool:
        """True when the plan is a permutation of the given id set."""
        return self.ids.size == dataset_ids.size and bool(
            np.array_equal(np.sort(self.ids), np.sort(dataset_ids))
        )


def order_random(ids, seed: int) -> OrderPlan:
    """Uniform shuffle, deterministic per seed."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size == 0:
        raise ValueError("cannot order an empty id set")
    perm = np.random.default_rng(seed).permutation(ids)
    return OrderPlan(perm, OrderStrategy.RANDOM, seed)


def order_by_lid(profile: LidProfile, direction: str) -> OrderPlan:
    """Sort ids by their LID estimate; ties and +inf sentinels by ascending id.

    direction "desc" puts the largest LID first (sentinels lead), "asc" the
    smallest first (sentinels trail).
    """
    if direction not in ("asc", "desc"):
        raise ValueError(f"direction must be 'asc' or 'desc', got {direction!r}")
    key = profile.lid if direction == "asc" else -profile.lid
    perm = profile.ids[np.lexsort((profile.ids, key))]
    strategy = OrderStrategy.LID_ASC if direction == "asc" else OrderStrategy.LID_DESC
    return OrderPlan(
        perm, strategy, None, {"k_neighbours": profile.k_neighbours}
    )


def order_by_category(
    categories: dict[int, str], sequence: list[str], seed: int
) -> OrderPlan:
    """Concatenate per-category blocks in the given sequence.

    The sequence must list every distinct category exactly once. Ids inside a
    block are shuffled with a per-block substream of the seed.
    """
    present = sorted(set(categories.values()))
    if sorted(sequence) != present:
        raise ValueError(
            f"sequence must be a permutation of the categories {present}, got {list(sequence)}"
        )
    ids_by_cat: dict[str, list[int]] = {c: [] for c in present}
    for id_, cat in categories.items():
        ids_by_cat[cat].append(int(id_))
    children = np.random.SeedSequence(seed).spawn(len(sequence))
    blocks = []
    for cat, child in zip(sequence, children):
        block = np.sort(np.asarray(ids_by_cat[cat], dtype=np.int64))
        blocks.append(np.random.default_rng(child).permutation(block))
    return OrderPlan(
        np.concatenate(blocks),
        OrderStrategy.CATEGORY,
        seed,
        {"sequence": list(sequence)},
    )
