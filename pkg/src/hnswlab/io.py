"""Bit-exact persistence for datasets and experiment artifacts.

Vectors interchange as fvecs (int32 dim + float32 payload per record,
little-endian); everything bulk-binary goes through one versioned container
(magic, version, JSON header, raw arrays) so loads can reject foreign or
stale files outright. Writers stage to a temp file and rename, so readers
never observe partial writes.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from pathlib import Path

import numpy as np

from . import knn
from .dataset import Dataset
from .dimest import LidProfile
from .errors import DataError
from .hnsw import GraphStats, HnswIndex, HnswParams, NeighborSelect
from .orders import OrderPlan, OrderStrategy
from .vecmath import Metric

_MAGIC = b"HLAB"
_VERSION = 1


# -- atomic file helpers -------------------------------------------------------


def _atomic_write_bytes(path: str | Path, payload: bytes) -> None:
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp.{os.getpid()}")
    tmp.write_bytes(payload)
    os.replace(tmp, path)


def _atomic_write_text(path: str | Path, text: str) -> None:
    _atomic_write_bytes(path, text.encode("utf-8"))


def save_json(path: str | Path, obj) -> None:
    _atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def load_json(path: str | Path):
    try:
        return json.loads(Path(path).read_text("utf-8"))
    except json.JSONDecodeError as e:
        raise DataError(f"{path}: invalid JSON: {e}") from e


# -- versioned binary container -------------------------------------------------


def _write_artifact(path, kind: str, meta: dict, arrays: dict[str, np.ndarray]) -> None:
    manifest = []
    blobs = []
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        manifest.append({"name": name, "dtype": arr.dtype.str, "shape": list(arr.shape)})
        blobs.append(arr.tobytes())
    header = json.dumps({"kind": kind, "meta": meta, "arrays": manifest}).encode("utf-8")
    payload = b"".join(
        [_MAGIC, struct.pack("<IQ", _VERSION, len(header)), header, *blobs]
    )
    _atomic_write_bytes(path, payload)


def _read_artifact(path, kind: str) -> tuple[dict, dict[str, np.ndarray]]:
    raw = Path(path).read_bytes()
    if len(raw) < 16:
        raise DataError(f"{path}: truncated header ({len(raw)} bytes)")
    if raw[:4] != _MAGIC:
        raise DataError(f"{path}: bad magic at offset 0 (not an hnswlab artifact)")
    version, hlen = struct.unpack_from("<IQ", raw, 4)
    if version != _VERSION:
        raise DataError(f"{path}: format version {version}, expected {_VERSION}")
    if len(raw) < 16 + hlen:
        raise DataError(f"{path}: truncated JSON header at offset 16")
    try:
        header = json.loads(raw[16 : 16 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise DataError(f"{path}: corrupt header: {e}") from e
    if header.get("kind") != kind:
        raise DataError(f"{path}: artifact kind {header.get('kind')!r}, expected {kind!r}")
    arrays: dict[str, np.ndarray] = {}
    offset = 16 + hlen
    for spec in header["arrays"]:
        dtype = np.dtype(spec["dtype"])
        shape = tuple(spec["shape"])
        nbytes = dtype.itemsize * int(np.prod(shape)) if shape else dtype.itemsize
        if len(raw) < offset + nbytes:
            raise DataError(
                f"{path}: truncated array {spec['name']!r} at offset {offset}"
            )
        arrays[spec["name"]] = (
            np.frombuffer(raw, dtype=dtype, count=int(np.prod(shape)), offset=offset)
            .reshape(shape)
            .copy()
        )
        offset += nbytes
    return header["meta"], arrays


# -- fvecs ----------------------------------------------------------------------


def write_fvecs(dataset: Dataset, path: str | Path) -> None:
    """Write vectors as fvecs records; payload is rounded to float32."""
    n, d = dataset.vectors.shape
    records = np.zeros(n, dtype=[("dim", "<i4"), ("values", "<f4", (d,))])
    records["dim"] = d
    records["values"] = dataset.vectors
    _atomic_write_bytes(path, records.tobytes())


def read_fvecs(path: str | Path) -> Dataset:
    """Load an fvecs file; ids are assigned by record position.

    Malformed files fail with the offending record index and byte offset.
    """
    raw = Path(path).read_bytes()
    if len(raw) == 0:
        raise DataError(f"{path}: empty file (datasets must be non-empty)")
    if len(raw) < 4:
        raise DataError(f"{path}: truncated record 0 at byte offset 0")
    d = struct.unpack_from("<i", raw, 0)[0]
    if d <= 0:
        raise DataError(f"{path}: record 0 at byte offset 0 has invalid dim {d}")
    rec_bytes = 4 + 4 * d
    if len(raw) % rec_bytes:
        _scan_fvecs_for_error(path, raw, d)
    n = len(raw) // rec_bytes
    ints = np.frombuffer(raw, dtype="<i4").reshape(n, d + 1)
    bad = np.flatnonzero(ints[:, 0] != d)
    if bad.size:
        i = int(bad[0])
        raise DataError(
            f"{path}: record {i} at byte offset {i * rec_bytes} has dim "
            f"{int(ints[i, 0])}, expected {d}"
        )
    floats = np.frombuffer(raw, dtype="<f4").reshape(n, d + 1)[:, 1:]
    return Dataset(floats.astype(np.float64))


def _scan_fvecs_for_error(path, raw: bytes, d0: int):
    """Walk records to pinpoint a dim change or truncation; always raises."""
    offset, record = 0, 0
    while offset < len(raw):
        if offset + 4 > len(raw):
            raise DataError(f"{path}: truncated record {record} at byte offset {offset}")
        d = struct.unpack_from("<i", raw, offset)[0]
        if d != d0:
            raise DataError(
                f"{path}: record {record} at byte offset {offset} has dim {d}, expected {d0}"
            )
        if offset + 4 + 4 * d > len(raw):
            raise DataError(f"{path}: truncated record {record} at byte offset {offset}")
        offset += 4 + 4 * d
        record += 1
    raise DataError(f"{path}: malformed fvecs file")  # pragma: no cover


# -- categories and qrels --------------------------------------------------------


def read_categories(path: str | Path) -> dict[int, str]:
    """Newline-delimited JSON objects {id, category} -> total id->label map."""
    labels: dict[int, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                id_ = int(obj["id"])
                cat = str(obj["category"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise DataError(f"{path}:{lineno}: bad category record: {e}") from e
            if id_ in labels:
                raise DataError(f"{path}:{lineno}: duplicate id {id_}")
            labels[id_] = cat
    if not labels:
        raise DataError(f"{path}: no category records")
    return labels


def read_qrels(path: str | Path) -> dict[str, dict[str, int]]:
    """TSV relevance judgments: query_id <tab> doc_id <tab> grade."""
    qrels: dict[str, dict[str, int]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(
                    f"{path}:{lineno}: expected query<tab>doc<tab>grade, got {line!r}"
                )
            try:
                grade = int(parts[2])
            except ValueError as e:
                raise DataError(f"{path}:{lineno}: grade must be an integer") from e
            if grade < 0:
                raise DataError(f"{path}:{lineno}: grade must be >= 0")
            qrels.setdefault(parts[0], {})[parts[1]] = grade
    if not qrels:
        raise DataError(f"{path}: no qrels records")
    return qrels


def write_qrels(qrels: dict[str, dict[str, int]], path: str | Path) -> None:
    lines = []
    for q in sorted(qrels):
        for doc, grade in sorted(qrels[q].items()):
            lines.append(f"{q}\t{doc}\t{grade}")
    _atomic_write_text(path, "\n".join(lines) + "\n")


# -- exact baselines ---------------------------------------------------------------


class BaselineSet:
    """Exact top-k results for a query set, content-addressed for caching."""

    def __init__(self, k, metric, dataset_hash, query_hash, ids, distances):
        self.k = int(k)
        self.metric = Metric(metric)
        self.dataset_hash = dataset_hash
        self.query_hash = query_hash
        self.ids = np.asarray(ids, dtype=np.int64)
        self.distances = np.asarray(distances, dtype=np.float64)

    def result(self, qi: int) -> knn.SearchResult:
        return knn.SearchResult(self.ids[qi], self.distances[qi])

    def __len__(self) -> int:
        return self.ids.shape[0]


def compute_baseline(X: Dataset, Q: Dataset, k: int, metric: Metric) -> BaselineSet:
    results = knn.exact_search_batch(X, Q, k, metric)
    return BaselineSet(
        k,
        metric,
        X.content_hash(),
        Q.content_hash(),
        np.stack([r.ids for r in results]),
        np.stack([r.distances for r in results]),
    )


def baseline_cache_name(dataset_hash, query_hash, k: int, metric: Metric) -> str:
    key = f"{dataset_hash}:{query_hash}:{k}:{Metric(metric).value}"
    return f"baseline-{hashlib.sha256(key.encode()).hexdigest()[:24]}.bin"


def save_baseline(path, b: BaselineSet) -> None:
    meta = {
        "k": b.k,
        "metric": b.metric.value,
        "dataset_hash": b.dataset_hash,
        "query_hash": b.query_hash,
    }
    _write_artifact(path, "baseline", meta, {"ids": b.ids, "distances": b.distances})


def load_baseline(path) -> BaselineSet:
    meta, arrays = _read_artifact(path, "baseline")
    return BaselineSet(
        meta["k"],
        meta["metric"],
        meta["dataset_hash"],
        meta["query_hash"],
        arrays["ids"],
        arrays["distances"],
    )


def cached_baseline(
    cache_dir: str | Path | None, X: Dataset, Q: Dataset, k: int, metric: Metric
) -> BaselineSet:
    """Load the baseline from the cache if present, else compute and store it."""
    if cache_dir is None:
        return compute_baseline(X, Q, k, metric)
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    path = cache_dir / baseline_cache_name(X.content_hash(), Q.content_hash(), k, metric)
    if path.exists():
        b = load_baseline(path)
        if b.dataset_hash != X.content_hash() or b.query_hash != Q.content_hash():
            raise DataError(f"{path}: cached baseline hash mismatch")
        return b
    b = compute_baseline(X, Q, k, metric)
    save_baseline(path, b)
    return b


# -- LID profiles -------------------------------------------------------------------


def profile_summary(profile: LidProfile) -> dict:
    finite = profile.lid[np.isfinite(profile.lid)]
    return {
        "k_neighbours": profile.k_neighbours,
        "metric": profile.metric.value,
        "points": int(profile.lid.shape[0]),
        "sentinel_count": profile.sentinel_count,
        "mean_lid": float(finite.mean()) if finite.size else None,
        "median_lid": float(np.median(finite)) if finite.size else None,
    }


def save_lid_profile(path, profile: LidProfile, dataset_hash: str | None = None) -> None:
    meta = {
        "k_neighbours": profile.k_neighbours,
        "metric": profile.metric.value,
        "dataset_hash": dataset_hash,
        "summary": profile_summary(profile),
    }
    _write_artifact(
        path,
        "lid_profile",
        meta,
        {
            "ids": profile.ids,
            "lid": profile.lid,
            "neighbour_distances": profile.neighbour_distances,
        },
    )


def load_lid_profile(path, dataset_hash: str | None = None) -> LidProfile:
    meta, arrays = _read_artifact(path, "lid_profile")
    if dataset_hash is not None and meta.get("dataset_hash") not in (None, dataset_hash):
        raise DataError(f"{path}: profile belongs to a different dataset")
    return LidProfile(
        meta["k_neighbours"],
        arrays["ids"],
        arrays["lid"],
        arrays["neighbour_distances"],
        Metric(meta["metric"]),
    )


# -- order plans ----------------------------------------------------------------------


def save_order_plan(path, plan: OrderPlan) -> None:
    """Text format: one JSON header line, then one id per line."""
    header = json.dumps(
        {
            "version": _VERSION,
            "strategy": plan.strategy.value,
            "seed": plan.seed,
            "detail": plan.detail,
        }
    )
    body = "\n".join(str(int(i)) for i in plan.ids)
    _atomic_write_text(path, header + "\n" + body + "\n")


def load_order_plan(path) -> OrderPlan:
    text = Path(path).read_text("utf-8").splitlines()
    if not text:
        raise DataError(f"{path}: empty order plan")
    try:
        header = json.loads(text[0])
    except json.JSONDecodeError as e:
        raise DataError(f"{path}:1: bad order plan header: {e}") from e
    if header.get("version") != _VERSION:
        raise DataError(f"{path}: order plan version {header.get('version')}, expected {_VERSION}")
    try:
        ids = np.asarray([int(x) for x in text[1:] if x.strip()], dtype=np.int64)
    except ValueError as e:
        raise DataError(f"{path}: non-integer id in order plan: {e}") from e
    return OrderPlan(
        ids,
        OrderStrategy(header["strategy"]),
        header.get("seed"),
        header.get("detail") or {},
    )


# -- index persistence -------------------------------------------------------------------


def save_index(path, index: HnswIndex) -> None:
    """Versioned binary dump: params, levels, per-layer CSR adjacency, insertion log."""
    if len(index) == 0:
        raise ValueError("refusing to save an empty index")
    n = len(index)
    params = index.params
    meta = {
        "params": {
            "M": params.M,
            "M0": params.M0,
            "ef_construction": params.ef_construction,
            "mL": params.mL,
            "seed": params.seed,
            "metric": params.metric.value,
            "neighbor_select": params.neighbor_select.value,
        },
        "n": n,
        "dim": index.dim,
        "entry_slot": index._entry,
        "max_level": index.max_level,
        "dataset_hash": index.dataset_hash,
    }
    arrays: dict[str, np.ndarray] = {
        "insertion_log": index.insertion_log,
        "levels": index.levels,
    }
    for layer in range(index.max_level + 1):
        indptr = np.zeros(n + 1, dtype=np.int64)
        chunks = []
        for slot in range(n):
            nbrs = index._layer_neighbours(layer, slot)
            if nbrs:
                chunks.append(np.asarray(nbrs, dtype=np.int32))
                indptr[slot + 1] = indptr[slot] + len(nbrs)
            else:
                indptr[slot + 1] = indptr[slot]
        arrays[f"indptr_{layer}"] = indptr
        arrays[f"indices_{layer}"] = (
            np.concatenate(chunks) if chunks else np.empty(0, dtype=np.int32)
        )
    _write_artifact(path, "hnsw_index", meta, arrays)


def load_index(path, dataset: Dataset) -> HnswIndex:
    """Rebuild an index against its dataset; the stored hash must match."""
    meta, arrays = _read_artifact(path, "hnsw_index")
    if meta["dataset_hash"] is not None and meta["dataset_hash"] != dataset.content_hash():
        raise DataError(f"{path}: index was built over a different dataset (hash mismatch)")
    p = meta["params"]
    params = HnswParams(
        M=p["M"],
        M0=p["M0"],
        ef_construction=p["ef_construction"],
        mL=p["mL"],
        seed=p["seed"],
        metric=Metric(p["metric"]),
        neighbor_select=NeighborSelect(p["neighbor_select"]),
    )
    n, dim = meta["n"], meta["dim"]
    index = HnswIndex(params, dim)
    index.reserve(n)
    log = arrays["insertion_log"]
    levels = arrays["levels"]
    if log.shape[0] != n or levels.shape[0] != n:
        raise DataError(f"{path}: inconsistent index arrays")
    for slot, id_ in enumerate(log.tolist()):
        v = dataset.vector(id_)
        index._vectors[slot] = v
        index._sqnorms[slot] = v @ v
        index._norms[slot] = np.sqrt(v @ v)
        index._ids.append(int(id_))
        index._slot_of_id[int(id_)] = slot
    index._size = n
    index._levels = [int(x) for x in levels]
    index._adj = [[[] for _ in range(n)]]
    for layer in range(1, meta["max_level"] + 1):
        index._adj.append(
            {slot: [] for slot in range(n) if index._levels[slot] >= layer}
        )
    for layer in range(meta["max_level"] + 1):
        indptr = arrays[f"indptr_{layer}"]
        indices = arrays[f"indices_{layer}"]
        for slot in range(n):
            lo, hi = int(indptr[slot]), int(indptr[slot + 1])
            if lo == hi:
                continue
            nbrs = [int(x) for x in indices[lo:hi]]
            if layer == 0:
                index._adj[0][slot] = nbrs
            else:
                index._adj[layer][slot] = nbrs
    index._entry = int(meta["entry_slot"])
    index._max_level = int(meta["max_level"])
    index.dataset_hash = meta["dataset_hash"]
    return index


def graph_stats_to_dict(stats: GraphStats) -> dict:
    return {
        "avg_path_length_layer0": stats.avg_path_length_layer0,
        "degree_histograms": [h.tolist() for h in stats.degree_histograms],
        "connected_components": stats.connected_components,
        "sampled_sources": stats.sampled_sources,
    }
