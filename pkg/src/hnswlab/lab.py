"""Experiment orchestration: datasets in, recall/NDCG tables and reports out.

Every experiment follows the same shape: materialize a dataset and query
set, compute (or load) the exact baseline once, build one index per
insertion order, evaluate every ef_search value against the shared
baseline, and emit a report whose aggregates are recomputable from the
embedded per-query values. Independent (order, ef) cells run in parallel;
each build stays strictly sequential.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from joblib import Parallel, delayed

from . import io as hio
from . import metrics
from .dataset import Dataset
from .dimest import lid_profile, pca_intrinsic_dim, per_category_intrinsic_dim
from .errors import DataError
from .hnsw import HnswParams, NeighborSelect, build
from .orders import OrderPlan, OrderStrategy, order_by_category, order_by_lid, order_random
from .synth import (
    SynthSpec,
    dataset_from_spec,
    generate_basis,
    generate_dataset,
    generate_query_set,
    split_seed,
)
from .vecmath import Metric

DEFAULT_EF_SEARCH = (10, 40)
DEFAULT_K = 10

_GRAPH_STATS_SOURCES = 64


# -- mixture datasets -----------------------------------------------------------


def make_mixture_bases(
    d: int, ks: list[int], seed: int, orthogonal: bool = False
) -> list[np.ndarray]:
    """One orthonormal basis per mixture component.

    With orthogonal=True the component subspaces are mutually orthogonal
    (rows of one big basis, so sum(ks) must fit in d); otherwise each
    component gets an independent random basis.
    """
    if orthogonal:
        total = sum(ks)
        if total > d:
            raise ValueError(f"orthogonal components need sum(ks)={total} <= d={d}")
        U = generate_basis(d, total, seed)
        out, at = [], 0
        for k in ks:
            out.append(U[at : at + k])
            at += k
        return out
    seeds = split_seed(seed, len(ks))
    return [generate_basis(d, k, s) for k, s in zip(ks, seeds)]


def mixture_from_bases(
    bases: list[np.ndarray],
    counts: list[int],
    seed: int,
    scales: list[float] | None = None,
    labels: list[str] | None = None,
) -> Dataset:
    """Concatenate per-component synthetic blocks into one dataset.

    Component i contributes counts[i] vectors spanning bases[i], with
    standard-normal coefficients times scales[i] (default 1). Ids run
    0..n-1 in block order; labels, if given, become per-id categories.
    """
    if len(counts) != len(bases):
        raise ValueError("need one count per basis")
    if scales is None:
        scales = [1.0] * len(bases)
    if labels is not None and len(labels) != len(bases):
        raise ValueError("need one label per basis")
    seeds = split_seed(seed, len(bases))
    blocks = []
    for U, n_i, s_i, scale in zip(bases, counts, seeds, scales):
        rng = np.random.default_rng(s_i)
        blocks.append(scale * rng.standard_normal((n_i, U.shape[0])) @ U)
    X = np.vstack(blocks)
    dataset = Dataset(X)
    if labels is not None:
        cats, at = {}, 0
        for label, n_i in zip(labels, counts):
            for id_ in range(at, at + n_i):
                cats[id_] = label
            at += n_i
        dataset.categories = cats
    return dataset


# -- configuration ---------------------------------------------------------------


@dataclass
class ExperimentConfig:
    """Fully specified experiment; JSON-serializable and rerunnable as-is."""

    dataset: dict[str, Any]
    queries: dict[str, Any]
    orders: list[dict[str, Any]]
    metric: Metric = Metric.L2
    M: int = 16
    M0: int | None = None
    ef_construction: int = 128
    mL: float | None = None
    neighbor_select: NeighborSelect = NeighborSelect.HEURISTIC
    ef_search: tuple[int, ...] = DEFAULT_EF_SEARCH
    k: int = DEFAULT_K
    seed: int = 0
    lid_neighbours: int = 100
    categories_path: str | None = None
    qrels_path: str | None = None
    cache_dir: str | None = None
    output_dir: str | None = None
    threads: int = 1

    def __post_init__(self):
        self.metric = Metric(self.metric)
        self.neighbor_select = NeighborSelect(self.neighbor_select)
        self.ef_search = tuple(int(e) for e in self.ef_search)
        if not self.orders:
            raise ValueError("at least one insertion order is required")
        if not self.ef_search:
            raise ValueError("at least one ef_search value is required")
        if self.k > min(self.ef_search):
            raise ValueError(
                f"k={self.k} exceeds the smallest ef_search={min(self.ef_search)}"
            )
        for spec in self.orders:
            strategy = OrderStrategy(spec["strategy"])
            if strategy is OrderStrategy.CATEGORY and "sequence" not in spec:
                raise ValueError("category orders need an explicit 'sequence'")

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "queries": self.queries,
            "orders": self.orders,
            "metric": self.metric.value,
            "M": self.M,
            "M0": self.M0,
            "ef_construction": self.ef_construction,
            "mL": self.mL,
            "neighbor_select": self.neighbor_select.value,
            "ef_search": list(self.ef_search),
            "k": self.k,
            "seed": self.seed,
            "lid_neighbours": self.lid_neighbours,
            "categories_path": self.categories_path,
            "qrels_path": self.qrels_path,
            "cache_dir": self.cache_dir,
            "output_dir": self.output_dir,
            "threads": self.threads,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(raw)
        if "ef_search" in kwargs:
            kwargs["ef_search"] = tuple(kwargs["ef_search"])
        return cls(**kwargs)


def _materialize(source: dict[str, Any], role_seed: int) -> Dataset:
    """Dataset from a config source: {"synth": {...}} or {"fvecs": path}."""
    if "synth" in source:
        spec = dict(source["synth"])
        spec.setdefault("seed", role_seed)
        return dataset_from_spec(SynthSpec(**spec))
    if "fvecs" in source:
        path = Path(source["fvecs"])
        if not path.exists():
            raise DataError(f"{path}: dataset file does not exist")
        return hio.read_fvecs(path)
    raise ValueError(f"dataset source must name 'synth' or 'fvecs', got {sorted(source)}")


# -- cell execution -----------------------------------------------------------------


def _run_cell(
    vectors: np.ndarray,
    ids: np.ndarray,
    order_ids: np.ndarray,
    order_strategy: str,
    order_seed,
    params_dict: dict,
    query_vectors: np.ndarray,
    ef_values: tuple[int, ...],
    k: int,
    stats_seed: int,
) -> dict:
    """Build one index and retrieve every query at every ef value.

    Runs inside a worker process; returns plain arrays and floats only.
    """
    dataset = Dataset(vectors, ids)
    params = HnswParams(**params_dict)
    plan = OrderPlan(order_ids, OrderStrategy(order_strategy), order_seed)
    t0 = time.perf_counter()
    index = build(dataset, plan, params)
    build_seconds = time.perf_counter() - t0
    out = {}
    for ef in ef_values:
        ranked = np.empty((len(query_vectors), k), dtype=np.int64)
        hops = 0
        evals = 0
        for qi, q in enumerate(query_vectors):
            result, stats = index.search(q, k, ef)
            row = np.full(k, -1, dtype=np.int64)
            row[: result.ids.shape[0]] = result.ids
            ranked[qi] = row
            hops += stats.hops
            evals += stats.distance_evals
        out[ef] = {
            "ranked": ranked,
            "mean_hops": hops / len(query_vectors),
            "mean_distance_evals": evals / len(query_vectors),
        }
    graph = index.graph_stats(_GRAPH_STATS_SOURCES, stats_seed)
    return {
        "ef": out,
        "graph_stats": hio.graph_stats_to_dict(graph),
        "build_seconds": build_seconds,
    }


def _params_dict(cfg: ExperimentConfig, level_seed: int) -> dict:
    return {
        "M": cfg.M,
        "M0": cfg.M0,
        "ef_construction": cfg.ef_construction,
        "mL": cfg.mL,
        "seed": level_seed,
        "metric": cfg.metric,
        "neighbor_select": cfg.neighbor_select,
    }


# -- report -------------------------------------------------------------------------


@dataclass
class CellReport:
    order_strategy: str
    order_seed: int | None
    order_detail: dict
    ef_search: int
    mean_recall: float
    per_query_recall: list[float]
    mean_ndcg: float | None
    ndcg_skipped_queries: int
    graph_stats: dict
    build_seconds: float
    mean_search_hops: float
    mean_distance_evals: float


@dataclass
class RunReport:
    config: dict
    dataset_hash: str
    query_hash: str
    cells: list[CellReport] = field(default_factory=list)
    correlations: dict = field(default_factory=dict)
    tool_version: str = ""

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "dataset_hash": self.dataset_hash,
            "query_hash": self.query_hash,
            "cells": [vars(c) for c in self.cells],
            "correlations": self.correlations,
            "tool_version": self.tool_version,
        }


def _recall_against_baseline(ranked: np.ndarray, baseline: hio.BaselineSet, k: int):
    per_query = np.empty(ranked.shape[0])
    for qi in range(ranked.shape[0]):
        exact_ids = baseline.ids[qi][:k]
        approx = ranked[qi][ranked[qi] >= 0][:k]
        per_query[qi] = len(set(approx.tolist()) & set(exact_ids.tolist())) / len(exact_ids)
    return per_query


def _ndcg_against_qrels(ranked: np.ndarray, query_ids: np.ndarray, qrels, k: int):
    values = []
    skipped = 0
    for qi in range(ranked.shape[0]):
        qkey = str(int(query_ids[qi]))
        if qkey not in qrels:
            skipped += 1
            continue
        docs = [str(int(d)) for d in ranked[qi] if d >= 0]
        values.append(metrics.ndcg_at_k(docs, qrels[qkey], k))
    return values, skipped


def run_experiment(cfg: ExperimentConfig) -> RunReport:
    """Execute every (order, ef_search) cell of the config and assemble the report."""
    from . import __version__

    data_seed, query_seed, level_seed, order_root = split_seed(cfg.seed, 4)
    X = _materialize(cfg.dataset, data_seed)
    Q = _materialize(cfg.queries, query_seed)
    if Q.dim != X.dim:
        raise DataError(f"query dim {Q.dim} does not match dataset dim {X.dim}")

    categories = None
    if cfg.categories_path:
        categories = hio.read_categories(cfg.categories_path)
        missing = [int(i) for i in X.ids if int(i) not in categories]
        if missing:
            raise DataError(f"category file misses dataset ids, e.g. {missing[:5]}")
    qrels = hio.read_qrels(cfg.qrels_path) if cfg.qrels_path else None

    baseline = hio.cached_baseline(cfg.cache_dir, X, Q, cfg.k, cfg.metric)

    needs_lid = any(
        OrderStrategy(o["strategy"]) in (OrderStrategy.LID_ASC, OrderStrategy.LID_DESC)
        for o in cfg.orders
    )
    profile = lid_profile(X, cfg.lid_neighbours, cfg.metric) if needs_lid else None

    order_seeds = split_seed(order_root, max(1, len(cfg.orders)))
    plans: list[OrderPlan] = []
    for spec, derived in zip(cfg.orders, order_seeds):
        strategy = OrderStrategy(spec["strategy"])
        seed = spec.get("seed", derived)
        if strategy is OrderStrategy.RANDOM:
            plans.append(order_random(X.ids, seed))
        elif strategy is OrderStrategy.LID_ASC:
            plans.append(order_by_lid(profile, "asc"))
        elif strategy is OrderStrategy.LID_DESC:
            plans.append(order_by_lid(profile, "desc"))
        else:
            if categories is None:
                raise DataError("category order requested but no categories file given")
            plans.append(order_by_category(categories, list(spec["sequence"]), seed))

    pdict = _params_dict(cfg, level_seed)
    n_jobs = cfg.threads if cfg.threads > 0 else -1
    raw_cells = Parallel(n_jobs=n_jobs)(
        delayed(_run_cell)(
            X.vectors,
            X.ids,
            plan.ids,
            plan.strategy.value,
            plan.seed,
            pdict,
            Q.vectors,
            cfg.ef_search,
            cfg.k,
            level_seed,
        )
        for plan in plans
    )

    report = RunReport(
        config=cfg.to_dict(),
        dataset_hash=X.content_hash(),
        query_hash=Q.content_hash(),
        tool_version=__version__,
    )
    for plan, raw in zip(plans, raw_cells):
        for ef in cfg.ef_search:
            ranked = raw["ef"][ef]["ranked"]
            per_query = _recall_against_baseline(ranked, baseline, cfg.k)
            mean_ndcg = None
            skipped = 0
            if qrels is not None:
                values, skipped = _ndcg_against_qrels(ranked, Q.ids, qrels, cfg.k)
                mean_ndcg = float(np.mean(values)) if values else None
            report.cells.append(
                CellReport(
                    order_strategy=plan.strategy.value,
                    order_seed=plan.seed,
                    order_detail=plan.detail,
                    ef_search=ef,
                    mean_recall=float(per_query.mean()),
                    per_query_recall=[float(x) for x in per_query],
                    mean_ndcg=mean_ndcg,
                    ndcg_skipped_queries=skipped,
                    graph_stats=raw["graph_stats"],
                    build_seconds=raw["build_seconds"],
                    mean_search_hops=raw["ef"][ef]["mean_hops"],
                    mean_distance_evals=raw["ef"][ef]["mean_distance_evals"],
                )
            )

    recalls = [c.mean_recall for c in report.cells]
    paths = [c.graph_stats["avg_path_length_layer0"] for c in report.cells]
    try:
        r = metrics.pearson(recalls, paths)
        report.correlations = {"recall_vs_avg_path_length": r, "cells": len(recalls)}
    except ValueError as e:
        report.correlations = {"recall_vs_avg_path_length": None, "note": str(e)}

    if cfg.output_dir:
        write_report_files(report, cfg.output_dir)
    return report


def manifest_from_report(report: RunReport) -> dict:
    """A rerunnable record of the run: resolved config plus input hashes."""
    return {
        "version": 1,
        "config": report.config,
        "dataset_hash": report.dataset_hash,
        "query_hash": report.query_hash,
        "tool_version": report.tool_version,
    }


def run_manifest(manifest: dict) -> RunReport:
    """Re-execute a manifest; the inputs must hash to what the manifest recorded."""
    report = run_experiment(ExperimentConfig.from_dict(manifest["config"]))
    for key, got in (("dataset_hash", report.dataset_hash), ("query_hash", report.query_hash)):
        want = manifest.get(key)
        if want is not None and got != want:
            raise DataError(f"manifest {key} mismatch: recorded {want[:12]}, got {got[:12]}")
    return report


def comparable_report_fields(report_dict: dict) -> dict:
    """The rerun-stable view of a report.

    Drops wall-clock timings and the execution-environment knobs (worker
    count, output paths) that steer how results are computed but not what
    they are.
    """
    import json as _json

    out = _json.loads(_json.dumps(report_dict))
    for cell in out.get("cells", []):
        cell.pop("build_seconds", None)
    for key in ("threads", "output_dir", "cache_dir"):
        out.get("config", {}).pop(key, None)
    return out


def write_report_files(report: RunReport, output_dir: str | Path) -> None:
    """report.json, manifest.json, and flat CSVs; assembled fully before writing."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    hio.save_json(out / "report.json", report.to_dict())
    hio.save_json(out / "manifest.json", manifest_from_report(report))
    rows = [
        {
            "order_strategy": c.order_strategy,
            "order_seed": c.order_seed,
            "ef_search": c.ef_search,
            "mean_recall": c.mean_recall,
            "mean_ndcg": c.mean_ndcg,
            "avg_path_length_layer0": c.graph_stats["avg_path_length_layer0"],
            "connected_components": c.graph_stats["connected_components"],
            "build_seconds": c.build_seconds,
            "mean_search_hops": c.mean_search_hops,
        }
        for c in report.cells
    ]
    _write_csv(out / "report.csv", rows)
    plotdir = out / "plotdata"
    plotdir.mkdir(exist_ok=True)
    _write_csv(
        plotdir / "recall_by_order.csv",
        [
            {"order": c.order_strategy, "ef_search": c.ef_search, "mean_recall": c.mean_recall}
            for c in report.cells
        ],
    )


def _write_csv(path: Path, rows: list[dict]) -> None:
    if not rows:
        return
    tmp = path.with_name(f".{path.name}.tmp")
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    tmp.replace(path)


# -- canned studies ------------------------------------------------------------------


def synthetic_id_sweep(
    d: int,
    n: int,
    n_q: int,
    basis_counts: list[int],
    ef_search: int = 40,
    k: int = DEFAULT_K,
    M: int = 16,
    ef_construction: int = 128,
    seeds: int | list[int] = 0,
    theta: float = 0.99,
    metric: Metric = Metric.L2,
    n_jobs: int = 1,
) -> list[dict]:
    """Recall as a function of the basis-vector count used to build the data.

    One independent dataset + query set per (seed, basis_count); rows carry
    the PCA intrinsic-dimensionality estimate and the mean recall@k of an
    index built in random insertion order.
    """
    if max(basis_counts) > d:
        raise ValueError("basis counts cannot exceed the ambient dimension")
    seed_list = [seeds] if isinstance(seeds, int) else list(seeds)
    tasks = []
    for seed in seed_list:
        subs = split_seed(seed, 4 * len(basis_counts))
        for i, count in enumerate(basis_counts):
            basis_seed, data_seed, query_seed, order_seed = subs[4 * i : 4 * i + 4]
            tasks.append((seed, count, basis_seed, data_seed, query_seed, order_seed))

    def _one(task):
        seed, count, basis_seed, data_seed, query_seed, order_seed = task
        U = generate_basis(d, count, basis_seed)
        X = generate_dataset(U, n, data_seed)
        Q = generate_query_set(U, n_q, query_seed)
        pca = pca_intrinsic_dim(X, theta)
        baseline = hio.compute_baseline(X, Q, k, metric)
        params = HnswParams(
            M=M, ef_construction=ef_construction, seed=seed, metric=metric
        )
        index = build(X, order_random(X.ids, order_seed), params)
        recalls = np.empty(len(Q))
        for qi, q in enumerate(Q.vectors):
            result, _ = index.search(q, k, ef_search)
            recalls[qi] = metrics.recall_at_k(result, baseline.result(qi), k)
        return {
            "seed": seed,
            "basis_count": count,
            "k_intrinsic": pca.k_intrinsic,
            "mean_recall": float(recalls.mean()),
        }

    rows = Parallel(n_jobs=n_jobs)(delayed(_one)(t) for t in tasks)
    return sorted(rows, key=lambda r: (r["seed"], r["basis_count"]))


def lid_order_study(
    dataset: Dataset,
    queries: Dataset,
    params: HnswParams,
    ef_search_values: tuple[int, ...] = DEFAULT_EF_SEARCH,
    k: int = DEFAULT_K,
    seed: int = 0,
    lid_neighbours: int = 100,
    n_jobs: int = 1,
    replicates: int = 1,
) -> dict:
    """DESC/ASC/RANDOM insertion orders on one dataset, all ef values.

    replicates > 1 averages each (order, ef) cell over that many
    level-assignment seeds, which separates the order effect from
    single-build noise. Returns rows plus the recall vs path-length Pearson
    correlation across cells (None when degenerate).
    """
    profile = lid_profile(dataset, lid_neighbours, params.metric)
    rand_seed, level_root = split_seed(seed, 2)
    level_seeds = split_seed(level_root, replicates)
    plans = [
        order_by_lid(profile, "desc"),
        order_by_lid(profile, "asc"),
        order_random(dataset.ids, rand_seed),
    ]
    baseline = hio.compute_baseline(dataset, queries, k, params.metric)

    tasks = [(plan, ls) for plan in plans for ls in level_seeds]
    raw = Parallel(n_jobs=n_jobs)(
        delayed(_run_cell)(
            dataset.vectors,
            dataset.ids,
            plan.ids,
            plan.strategy.value,
            plan.seed,
            {
                "M": params.M,
                "M0": params.M0,
                "ef_construction": params.ef_construction,
                "mL": params.mL,
                "seed": level_seed,
                "metric": params.metric,
                "neighbor_select": params.neighbor_select,
            },
            queries.vectors,
            tuple(ef_search_values),
            k,
            level_seed,
        )
        for plan, level_seed in tasks
    )

    rows = []
    for (plan, level_seed), cell in zip(tasks, raw):
        for ef in ef_search_values:
            per_query = _recall_against_baseline(cell["ef"][ef]["ranked"], baseline, k)
            rows.append(
                {
                    "order": plan.strategy.value,
                    "ef_search": ef,
                    "level_seed": level_seed,
                    "mean_recall": float(per_query.mean()),
                    "avg_path_length_layer0": cell["graph_stats"]["avg_path_length_layer0"],
                    "connected_components": cell["graph_stats"]["connected_components"],
                    "mean_search_hops": cell["ef"][ef]["mean_hops"],
                    "build_seconds": cell["build_seconds"],
                }
            )

    summary = {}
    for plan in plans:
        name = plan.strategy.value
        for ef in ef_search_values:
            vals = [
                r["mean_recall"]
                for r in rows
                if r["order"] == name and r["ef_search"] == ef
            ]
            summary[(name, ef)] = float(np.mean(vals))
    try:
        corr = metrics.pearson(
            [r["mean_recall"] for r in rows],
            [r["avg_path_length_layer0"] for r in rows],
        )
    except ValueError:
        corr = None
    return {"rows": rows, "summary": summary, "recall_vs_path_length": corr}


def category_order_study(
    dataset: Dataset,
    categories: dict[int, str],
    sequences: list[list[str]],
    params: HnswParams,
    queries: Dataset,
    ef_search_values: tuple[int, ...] = (10,),
    k: int = DEFAULT_K,
    seed: int = 0,
    theta: float = 0.99,
    n_jobs: int = 1,
) -> dict:
    """Recall per category insertion sequence, plus per-category PCA reports.

    Each sequence yields one index (blocks internally shuffled from a seed
    substream); all sequences share the same level seed and baseline.
    """
    if not sequences:
        raise ValueError("need at least one category sequence")
    per_cat, whole = per_category_intrinsic_dim(dataset, categories, theta)
    baseline = hio.compute_baseline(dataset, queries, k, params.metric)
    seq_seeds = split_seed(seed, len(sequences))
    plans = [
        order_by_category(categories, list(seq), s)
        for seq, s in zip(sequences, seq_seeds)
    ]
    raw = Parallel(n_jobs=n_jobs)(
        delayed(_run_cell)(
            dataset.vectors,
            dataset.ids,
            plan.ids,
            plan.strategy.value,
            plan.seed,
            {
                "M": params.M,
                "M0": params.M0,
                "ef_construction": params.ef_construction,
                "mL": params.mL,
                "seed": params.seed,
                "metric": params.metric,
                "neighbor_select": params.neighbor_select,
            },
            queries.vectors,
            tuple(ef_search_values),
            k,
            params.seed,
        )
        for plan in plans
    )
    rows = []
    for plan, cell in zip(plans, raw):
        for ef in ef_search_values:
            per_query = _recall_against_baseline(cell["ef"][ef]["ranked"], baseline, k)
            rows.append(
                {
                    "sequence": plan.detail["sequence"],
                    "ef_search": ef,
                    "mean_recall": float(per_query.mean()),
                    "avg_path_length_layer0": cell["graph_stats"]["avg_path_length_layer0"],
                }
            )
    return {
        "rows": rows,
        "per_category_k_intrinsic": {c: r.k_intrinsic for c, r in per_cat.items()},
        "whole_set_k_intrinsic": whole.k_intrinsic,
    }
