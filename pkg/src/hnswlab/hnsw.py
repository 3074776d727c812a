"""From-scratch HNSW index with order-sensitive construction and instrumentation.

Construction is strictly sequential in the caller-supplied order: insertion
order is the experimental variable this index exists to study, so no
parallel or reordered building is offered. Levels are drawn from a PCG64
generator seeded by the params, one draw per insertion event, making builds
a pure function of (dataset, order, params).

Distances are evaluated in float64 via a fused gather + matvec kernel; L2
uses squared distances internally (rank-equivalent) and every returned
distance is recomputed with vecmath.distance before leaving search().
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import vecmath
from .dataset import Dataset
from .knn import SearchResult
from .orders import OrderPlan
from .vecmath import Metric

DEFAULT_M = 16
DEFAULT_EF_CONSTRUCTION = 128


class NeighborSelect(str, Enum):
    SIMPLE = "simple"
    HEURISTIC = "heuristic"


def draw_level(rng: np.random.Generator, mL: float) -> int:
    """One level draw: floor(-ln(u) * mL) with u uniform over (0, 1]."""
    u = 1.0 - rng.random()
    return int(-math.log(u) * mL)


@dataclass(frozen=True)
class HnswParams:
    """Construction-time knobs. M and ef_construction default to the common
    production values; mL defaults to 1/ln(M)."""

    M: int = DEFAULT_M
    M0: int | None = None
    ef_construction: int = DEFAULT_EF_CONSTRUCTION
    mL: float | None = None
    seed: int = 0
    metric: Metric = Metric.L2
    neighbor_select: NeighborSelect = NeighborSelect.HEURISTIC

    def __post_init__(self):
        if self.M < 2:
            raise ValueError(f"need M >= 2, got {self.M}")
        if self.M0 is None:
            object.__setattr__(self, "M0", 2 * self.M)
        elif self.M0 < self.M:
            raise ValueError(f"need M0 >= M, got M0={self.M0}, M={self.M}")
        if self.ef_construction < self.M:
            raise ValueError(
                f"need ef_construction >= M, got {self.ef_construction} < {self.M}"
            )
        if self.mL is None:
            object.__setattr__(self, "mL", 1.0 / math.log(self.M))
        elif self.mL <= 0:
            raise ValueError(f"need mL > 0, got {self.mL}")
        object.__setattr__(self, "metric", Metric(self.metric))
        object.__setattr__(self, "neighbor_select", NeighborSelect(self.neighbor_select))


@dataclass
class SearchStats:
    """Per-query instrumentation: candidate expansions and distance computations."""

    hops: int = 0
    distance_evals: int = 0


@dataclass
class GraphStats:
    """Layer-0 navigability measures plus per-layer degree distributions."""

    avg_path_length_layer0: float
    degree_histograms: list[np.ndarray]
    connected_components: int
    sampled_sources: int


class HnswIndex:
    """Multi-layer proximity graph over vectors keyed by integer id."""

    def __init__(self, params: HnswParams, dim: int | None = None):
        self.params = params
        self._dim = dim
        self._rng = np.random.default_rng(params.seed)
        self._size = 0
        self._capacity = 0
        self._vectors: np.ndarray | None = None
        self._sqnorms: np.ndarray | None = None
        self._norms: np.ndarray | None = None
        self._ids: list[int] = []
        self._slot_of_id: dict[int, int] = {}
        self._levels: list[int] = []
        # _adj[0] is a dense list-of-lists over slots; upper layers are dicts
        # holding only the slots present at that layer.
        self._adj: list = [[]]
        self._entry = -1
        self._max_level = -1
        self.dataset_hash: str | None = None

    # -- basic accessors ----------------------------------------------------

    def __len__(self) -> int:
        return self._size

    @property
    def dim(self) -> int | None:
        return self._dim

    @property
    def entry_point(self) -> int | None:
        return None if self._entry < 0 else self._ids[self._entry]

    @property
    def max_level(self) -> int:
        return self._max_level

    @property
    def insertion_log(self) -> np.ndarray:
        """Ids in the order they were inserted (slot order)."""
        return np.asarray(self._ids, dtype=np.int64)

    @property
    def levels(self) -> np.ndarray:
        return np.asarray(self._levels, dtype=np.int32)

    def level_of(self, id_: int) -> int:
        return self._levels[self._slot_of_id[int(id_)]]

    def neighbours_of(self, id_: int, layer: int) -> list[int]:
        """External-id neighbour list of a node at a layer (copy)."""
        slot = self._slot_of_id[int(id_)]
        nbrs = self._layer_neighbours(layer, slot)
        return [] if nbrs is None else [self._ids[s] for s in nbrs]

    # -- internals ----------------------------------------------------------

    def _layer_neighbours(self, layer: int, slot: int):
        if layer == 0:
            return self._adj[0][slot]
        return self._adj[layer].get(slot)

    def _ensure_capacity(self, need: int):
        if need <= self._capacity:
            return
        cap = max(need, int(self._capacity * 1.5), 256)
        vectors = np.empty((cap, self._dim), dtype=np.float64)
        sqnorms = np.empty(cap, dtype=np.float64)
        norms = np.empty(cap, dtype=np.float64)
        if self._size:
            vectors[: self._size] = self._vectors[: self._size]
            sqnorms[: self._size] = self._sqnorms[: self._size]
            norms[: self._size] = self._norms[: self._size]
        self._vectors, self._sqnorms, self._norms = vectors, sqnorms, norms
        self._capacity = cap

    def reserve(self, n: int):
        """Preallocate room for n vectors (build() calls this)."""
        if self._dim is not None:
            self._ensure_capacity(n)

    def _q_aux(self, q: np.ndarray) -> float:
        metric = self.params.metric
        if metric is Metric.L2:
            return float(q @ q)
        if metric is Metric.COSINE:
            qn = float(np.sqrt(q @ q))
            if qn == 0.0:
                raise ValueError("cosine metric is undefined for zero vectors")
            return qn
        return 0.0

    def _keys(self, q: np.ndarray, aux: float, rows: np.ndarray, stats=None) -> np.ndarray:
        """Comparison keys of q against vector rows; smaller = closer.

        L2 keys are squared distances (same ordering, cheaper); COSINE and
        INNER_PRODUCT keys equal the metric's actual values.
        """
        if stats is not None:
            stats.distance_evals += rows.size
        g = self._vectors[rows] @ q
        metric = self.params.metric
        if metric is Metric.L2:
            return self._sqnorms[rows] - 2.0 * g + aux
        if metric is Metric.COSINE:
            return 1.0 - g / (self._norms[rows] * aux)
        return -g

    def _key1(self, q: np.ndarray, aux: float, slot: int, stats=None) -> float:
        if stats is not None:
            stats.distance_evals += 1
        g = float(self._vectors[slot] @ q)
        metric = self.params.metric
        if metric is Metric.L2:
            return float(self._sqnorms[slot]) - 2.0 * g + aux
        if metric is Metric.COSINE:
            return 1.0 - g / (float(self._norms[slot]) * aux)
        return -g

    def _greedy_descent(self, q, aux, ep, ep_key, layer, stats=None):
        """Move to the closest neighbour until no neighbour improves."""
        while True:
            nbrs = self._layer_neighbours(layer, ep)
            if not nbrs:
                return ep, ep_key
            rows = np.fromiter(nbrs, dtype=np.int64, count=len(nbrs))
            keys = self._keys(q, aux, rows, stats)
            j = int(np.argmin(keys))
            if keys[j] < ep_key:
                ep, ep_key = int(rows[j]), float(keys[j])
                if stats is not None:
                    stats.hops += 1
            else:
                return ep, ep_key

    def _search_layer(self, q, aux, entries, layer, ef, stats=None):
        """Best-first beam search; returns ascending (key, slot) of the beam."""
        visited = np.zeros(self._size, dtype=bool)
        for _, s in entries:
            visited[s] = True
        candidates = list(entries)
        heapq.heapify(candidates)
        beam = [(-k, s) for k, s in entries]
        heapq.heapify(beam)
        bound = -beam[0][0]
        full = len(beam) >= ef
        while candidates:
            key, c = heapq.heappop(candidates)
            if full and key > bound:
                break
            if stats is not None:
                stats.hops += 1
            nbrs = self._layer_neighbours(layer, c)
            if not nbrs:
                continue
            rows = np.fromiter(nbrs, dtype=np.int64, count=len(nbrs))
            rows = rows[~visited[rows]]
            if rows.size == 0:
                continue
            visited[rows] = True
            keys = self._keys(q, aux, rows, stats)
            for kk, ss in zip(keys.tolist(), rows.tolist()):
                if not full or kk < bound:
                    heapq.heappush(candidates, (kk, ss))
                    if full:
                        heapq.heappushpop(beam, (-kk, ss))
                    else:
                        heapq.heappush(beam, (-kk, ss))
                        full = len(beam) >= ef
                    bound = -beam[0][0]
        return sorted((-nk, s) for nk, s in beam)

    def _select(self, candidates, m):
        """Pick up to m neighbours from ascending (key, slot) candidates.

        SIMPLE keeps the m closest. HEURISTIC applies the diversity rule:
        accept a candidate only if it is closer to the query point than to
        every neighbour already accepted, which spreads links across
        directions instead of saturating one tight cluster.
        """
        if len(candidates) <= m:
            return list(candidates)
        if self.params.neighbor_select is NeighborSelect.SIMPLE:
            return list(candidates[:m])
        selected: list = []
        sel_rows = np.empty(m, dtype=np.int64)
        n_sel = 0
        for key, slot in candidates:
            if n_sel >= m:
                break
            if n_sel == 0:
                selected.append((key, slot))
                sel_rows[0] = slot
                n_sel = 1
                continue
            v = self._vectors[slot]
            aux = (
                float(self._sqnorms[slot])
                if self.params.metric is Metric.L2
                else float(self._norms[slot])
            )
            to_selected = self._keys(v, aux, sel_rows[:n_sel])
            if key < float(to_selected.min()):
                selected.append((key, slot))
                sel_rows[n_sel] = slot
                n_sel += 1
        return selected

    def _shrink(self, owner_slot: int, layer: int, cap: int):
        """Re-run neighbour selection for an over-full adjacency list."""
        nbrs = self._layer_neighbours(layer, owner_slot)
        rows = np.fromiter(nbrs, dtype=np.int64, count=len(nbrs))
        v = self._vectors[owner_slot]
        aux = (
            float(self._sqnorms[owner_slot])
            if self.params.metric is Metric.L2
            else float(self._norms[owner_slot])
        )
        keys = self._keys(v, aux, rows)
        ranked = sorted(zip(keys.tolist(), rows.tolist()))
        kept = [s for _, s in self._select(ranked, cap)]
        if layer == 0:
            self._adj[0][owner_slot] = kept
        else:
            self._adj[layer][owner_slot] = kept

    # -- construction ---------------------------------------------------------

    def insert(self, id_: int, vector) -> None:
        """Insert one vector; sequential only, duplicate ids rejected."""
        id_ = int(id_)
        if id_ in self._slot_of_id:
            raise ValueError(f"id {id_} already present")
        v = np.asarray(vector, dtype=np.float64)
        if v.ndim != 1:
            raise ValueError(f"vector must be 1-d, got shape {v.shape}")
        if self._dim is None:
            self._dim = int(v.shape[0])
        elif v.shape[0] != self._dim:
            raise ValueError(f"dimension mismatch: {v.shape[0]} vs index dim {self._dim}")
        if not np.all(np.isfinite(v)):
            raise ValueError("vector contains NaN or Inf")
        nrm = float(np.sqrt(v @ v))
        if self.params.metric is Metric.COSINE and nrm == 0.0:
            raise ValueError("cosine metric is undefined for zero vectors")

        self._ensure_capacity(self._size + 1)
        slot = self._size
        self._vectors[slot] = v
        self._sqnorms[slot] = v @ v
        self._norms[slot] = nrm
        self._ids.append(id_)
        self._slot_of_id[id_] = slot
        self._size += 1

        level = draw_level(self._rng, self.params.mL)
        self._levels.append(level)
        self._adj[0].append([])
        while len(self._adj) <= level:
            self._adj.append({})
        for layer in range(1, level + 1):
            self._adj[layer][slot] = []

        if self._entry < 0:
            self._entry = slot
            self._max_level = level
            return

        q = self._vectors[slot]
        aux = self._q_aux(q)
        ep = self._entry
        ep_key = self._key1(q, aux, ep)
        for layer in range(self._max_level, level, -1):
            ep, ep_key = self._greedy_descent(q, aux, ep, ep_key, layer)
        entries = [(ep_key, ep)]
        for layer in range(min(level, self._max_level), -1, -1):
            beam = self._search_layer(q, aux, entries, layer, self.params.ef_construction)
            cap = self.params.M0 if layer == 0 else self.params.M
            mine = self._layer_neighbours(layer, slot)
            for _, nb in self._select(beam, self.params.M):
                mine.append(nb)
                other = self._layer_neighbours(layer, nb)
                other.append(slot)
                if len(other) > cap:
                    self._shrink(nb, layer, cap)
            entries = beam
        if level > self._max_level:
            self._entry = slot
            self._max_level = level

    # -- queries --------------------------------------------------------------

    def search(self, q, k: int, ef_search: int) -> tuple[SearchResult, SearchStats]:
        """Approximate top-k: greedy descent to layer 0, then beam of ef_search.

        Returned distances are recomputed with vecmath.distance; ties are
        broken by ascending id.
        """
        if self._size == 0:
            raise ValueError("cannot search an empty index")
        if k < 1:
            raise ValueError(f"need k >= 1, got {k}")
        if ef_search < k:
            raise ValueError(f"need ef_search >= k, got ef_search={ef_search}, k={k}")
        v = np.asarray(q, dtype=np.float64)
        if v.shape != (self._dim,):
            raise ValueError(f"query shape {v.shape} does not match index dim {self._dim}")
        if not np.all(np.isfinite(v)):
            raise ValueError("query contains NaN or Inf")
        stats = SearchStats()
        aux = self._q_aux(v)
        ep = self._entry
        ep_key = self._key1(v, aux, ep, stats)
        for layer in range(self._max_level, 0, -1):
            ep, ep_key = self._greedy_descent(v, aux, ep, ep_key, layer, stats)
        beam = self._search_layer(v, aux, [(ep_key, ep)], 0, ef_search, stats)
        # Keys rank candidates; exact distances decide the final top-k. The
        # small margin lets an exact recomputation reorder near-ties.
        head = beam[: min(len(beam), k + 8)]
        ids = np.asarray([self._ids[s] for _, s in head], dtype=np.int64)
        dists = np.asarray(
            [
                vecmath.distance(self._vectors[s], v, self.params.metric)
                for _, s in head
            ]
        )
        order = np.lexsort((ids, dists))[:k]
        return SearchResult(ids[order], dists[order]), stats

    # -- instrumentation --------------------------------------------------------

    def _undirected_layer0(self) -> list[np.ndarray]:
        """Neighbour arrays of the undirected view of layer 0."""
        src, dst = [], []
        for u, nbrs in enumerate(self._adj[0]):
            for w in nbrs:
                src.append(u)
                dst.append(w)
        if not src:
            return [np.empty(0, dtype=np.int64) for _ in range(self._size)]
        a = np.asarray(src + dst, dtype=np.int64)
        b = np.asarray(dst + src, dtype=np.int64)
        key = a * self._size + b
        uniq = np.unique(key)
        a, b = uniq // self._size, uniq % self._size
        counts = np.bincount(a, minlength=self._size)
        offsets = np.concatenate(([0], np.cumsum(counts)))
        return [b[offsets[i] : offsets[i + 1]] for i in range(self._size)]

    def graph_stats(
        self, sample_sources: int = 64, seed: int = 0, sources: list[int] | None = None
    ) -> GraphStats:
        """BFS-based layer-0 statistics.

        avg_path_length_layer0 is the mean hop distance from uniformly
        sampled source nodes to every node reachable from them (sources
        excluded); components are counted on the same undirected view.
        Explicit sources (external ids) override the sampling.
        """
        if self._size == 0:
            raise ValueError("cannot compute stats of an empty index")
        und = self._undirected_layer0()
        n = self._size

        visited = np.zeros(n, dtype=bool)
        components = 0
        for s in range(n):
            if visited[s]:
                continue
            components += 1
            visited[s] = True
            queue = deque([s])
            while queue:
                u = queue.popleft()
                for w in und[u][~visited[und[u]]].tolist():
                    visited[w] = True
                    queue.append(w)

        if sources is not None:
            src = np.asarray([self._slot_of_id[int(i)] for i in sources], dtype=np.int64)
            n_sources = src.size
            sources = src
        else:
            n_sources = min(sample_sources, n)
            sources = np.random.default_rng(seed).choice(n, size=n_sources, replace=False)
        total, pairs = 0, 0
        for s in sources.tolist():
            dist = np.full(n, -1, dtype=np.int64)
            dist[s] = 0
            queue = deque([s])
            while queue:
                u = queue.popleft()
                du = dist[u]
                fresh = und[u][dist[und[u]] < 0]
                if fresh.size:
                    dist[fresh] = du + 1
                    queue.extend(fresh.tolist())
            reach = dist > 0
            total += int(dist[reach].sum())
            pairs += int(reach.sum())
        avg = total / pairs if pairs else 0.0

        hists = []
        for layer in range(self._max_level + 1):
            if layer == 0:
                degrees = np.asarray([len(x) for x in self._adj[0]], dtype=np.int64)
            else:
                degrees = np.asarray(
                    [len(x) for x in self._adj[layer].values()], dtype=np.int64
                )
            hists.append(np.bincount(degrees) if degrees.size else np.zeros(1, dtype=np.int64))
        return GraphStats(avg, hists, components, n_sources)


def new_index(params: HnswParams, dim: int | None = None) -> HnswIndex:
    """Fresh empty index with a seeded level generator."""
    return HnswIndex(params, dim)


def build(dataset: Dataset, order: OrderPlan, params: HnswParams) -> HnswIndex:
    """Sequential build following the order plan exactly."""
    if not order.covers(dataset.ids):
        raise ValueError("order plan is not a permutation of the dataset ids")
    index = HnswIndex(params, dataset.dim)
    index.reserve(len(dataset))
    for id_ in order.ids.tolist():
        index.insert(id_, dataset.vectors[dataset.row_of(id_)])
    index.dataset_hash = dataset.content_hash()
    return index
