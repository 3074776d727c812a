"""Command-line surface. One subcommand per library operation.

Exit codes: 0 success, 2 usage error, 3 data/file error, 4 internal error.
Every subcommand prints its resolved configuration to stderr before doing
any work; pass --json for machine-readable results on stdout.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, io as hio, lab
from .dataset import Dataset
from .dimest import lid_profile, pca_intrinsic_dim
from .errors import DataError, InvariantError
from .hnsw import HnswParams, NeighborSelect, build
from .orders import order_random
from .synth import SynthSpec, generate_basis, generate_dataset, generate_query_set, split_seed
from .vecmath import Metric

_ENV_CACHE = "HNSWLAB_CACHE"


def _echo_config(args: argparse.Namespace) -> None:
    resolved = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    print(f"config: {json.dumps(resolved, default=str)}", file=sys.stderr)


def _emit(args, payload: dict, human: str) -> None:
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True, default=str))
    else:
        print(human)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--json", action="store_true", help="emit machine-readable JSON on stdout")


def _metric_arg(p: argparse.ArgumentParser, default: str = "l2") -> None:
    p.add_argument(
        "--metric",
        choices=[m.value for m in Metric],
        default=default,
        help="distance metric",
    )


# -- subcommand handlers -----------------------------------------------------------


def _cmd_synth_gen(args) -> int:
    spec = SynthSpec(d=args.d, k=args.k, n=args.n, seed=args.seed)
    basis_seed, data_seed, query_seed = split_seed(spec.seed, 3)
    U = generate_basis(spec.d, spec.k, basis_seed)
    X = generate_dataset(U, spec.n, data_seed)
    hio.write_fvecs(X, args.out)
    sidecar = {
        "d": spec.d,
        "k": spec.k,
        "n": spec.n,
        "seed": spec.seed,
        "dataset_hash": X.content_hash(),
        "tool_version": __version__,
    }
    if args.queries_out:
        Q = generate_query_set(U, args.n_q, query_seed)
        hio.write_fvecs(Q, args.queries_out)
        sidecar["n_q"] = args.n_q
        sidecar["query_hash"] = Q.content_hash()
    hio.save_json(str(args.out) + ".json", sidecar)
    _emit(args, sidecar, f"wrote {args.out} ({spec.n} x {spec.d}, basis {spec.k})")
    return 0


def _cmd_id_estimate(args) -> int:
    X = hio.read_fvecs(args.data)
    report = pca_intrinsic_dim(X, args.theta)
    if args.csv:
        lines = ["component,explained_variance_ratio,cumulative"]
        for i, (r, c) in enumerate(
            zip(report.explained_variance_ratios, report.cumulative), start=1
        ):
            lines.append(f"{i},{r:.12g},{c:.12g}")
        Path(args.csv).write_text("\n".join(lines) + "\n")
    payload = {
        "k_intrinsic": report.k_intrinsic,
        "theta": report.theta,
        "components": int(report.explained_variance_ratios.shape[0]),
    }
    _emit(args, payload, f"k_intrinsic={report.k_intrinsic} at theta={report.theta}")
    return 0


def _cmd_lid_profile(args) -> int:
    X = hio.read_fvecs(args.data)
    profile = lid_profile(X, args.k_neighbours, Metric(args.metric))
    hio.save_lid_profile(args.out, profile, X.content_hash())
    summary = hio.profile_summary(profile)
    hio.save_json(str(args.out) + ".json", summary)
    _emit(
        args,
        summary,
        f"profiled {len(X)} points: mean lid {summary['mean_lid']:.3f}, "
        f"median {summary['median_lid']:.3f}, sentinels {summary['sentinel_count']}",
    )
    return 0


def _cmd_exact_baseline(args) -> int:
    X = hio.read_fvecs(args.data)
    Q = hio.read_fvecs(args.queries)
    cache_dir = args.cache_dir or os.environ.get(_ENV_CACHE)
    baseline = hio.cached_baseline(cache_dir, X, Q, args.k, Metric(args.metric))
    if args.out:
        hio.save_baseline(args.out, baseline)
    payload = {
        "queries": len(baseline),
        "k": baseline.k,
        "metric": baseline.metric.value,
        "dataset_hash": baseline.dataset_hash,
        "query_hash": baseline.query_hash,
    }
    _emit(args, payload, f"baseline over {len(baseline)} queries at k={baseline.k}")
    return 0


def _cmd_build(args) -> int:
    X = hio.read_fvecs(args.data)
    if args.order:
        plan = hio.load_order_plan(args.order)
    else:
        plan = order_random(X.ids, args.seed)
    params = HnswParams(
        M=args.M,
        ef_construction=args.ef_construction,
        seed=args.level_seed,
        metric=Metric(args.metric),
        neighbor_select=NeighborSelect(args.neighbor_select),
    )
    index = build(X, plan, params)
    hio.save_index(args.out, index)
    payload = {
        "n": len(index),
        "max_level": index.max_level,
        "entry_point": index.entry_point,
        "out": str(args.out),
    }
    _emit(args, payload, f"built index over {len(index)} vectors -> {args.out}")
    return 0


def _cmd_search_eval(args) -> int:
    X = hio.read_fvecs(args.data)
    Q = hio.read_fvecs(args.queries)
    index = hio.load_index(args.index, X)
    if args.baseline:
        baseline = hio.load_baseline(args.baseline)
        if baseline.k < args.k:
            raise DataError(f"baseline holds k={baseline.k} < requested k={args.k}")
    else:
        cache_dir = args.cache_dir or os.environ.get(_ENV_CACHE)
        baseline = hio.cached_baseline(cache_dir, X, Q, args.k, index.params.metric)
    ef_values = args.ef_search or [10]
    rows = []
    for ef in ef_values:
        recalls = np.empty(len(Q))
        for qi, q in enumerate(Q.vectors):
            result, _ = index.search(q, args.k, ef)
            exact_ids = set(baseline.ids[qi][: args.k].tolist())
            recalls[qi] = len(set(result.ids.tolist()) & exact_ids) / len(exact_ids)
        rows.append({"ef_search": ef, "mean_recall": float(recalls.mean())})
    _emit(
        args,
        {"k": args.k, "rows": rows},
        "\n".join(f"ef_search={r['ef_search']}: recall@{args.k}={r['mean_recall']:.4f}" for r in rows),
    )
    return 0


def _cmd_graph_stats(args) -> int:
    X = hio.read_fvecs(args.data)
    index = hio.load_index(args.index, X)
    stats = index.graph_stats(args.sample_sources, args.seed)
    payload = hio.graph_stats_to_dict(stats)
    _emit(
        args,
        payload,
        f"avg path length (layer 0): {stats.avg_path_length_layer0:.3f} over "
        f"{stats.sampled_sources} sources; components: {stats.connected_components}",
    )
    return 0


def _cmd_experiment(args) -> int:
    raw = hio.load_json(args.config)
    if args.output_dir:
        raw["output_dir"] = args.output_dir
    if args.threads is not None:
        raw["threads"] = args.threads
    if "cache_dir" not in raw or raw["cache_dir"] is None:
        raw["cache_dir"] = os.environ.get(_ENV_CACHE)
    cfg = lab.ExperimentConfig.from_dict(raw)
    report = lab.run_experiment(cfg)
    lines = [
        f"{c.order_strategy:<10s} ef={c.ef_search:<4d} recall@{cfg.k}={c.mean_recall:.4f}"
        + (f" ndcg@{cfg.k}={c.mean_ndcg:.4f}" if c.mean_ndcg is not None else "")
        for c in report.cells
    ]
    _emit(args, report.to_dict(), "\n".join(lines))
    return 0


def _cmd_report(args) -> int:
    raw = hio.load_json(args.report)
    cells = raw.get("cells", [])
    if args.csv_dir:
        report = lab.RunReport(
            config=raw["config"],
            dataset_hash=raw["dataset_hash"],
            query_hash=raw["query_hash"],
            cells=[lab.CellReport(**c) for c in cells],
            correlations=raw.get("correlations", {}),
            tool_version=raw.get("tool_version", ""),
        )
        lab.write_report_files(report, args.csv_dir)
    lines = [
        f"{c['order_strategy']:<10s} ef={c['ef_search']:<4d} recall={c['mean_recall']:.4f} "
        f"path_len={c['graph_stats']['avg_path_length_layer0']:.3f}"
        for c in cells
    ]
    corr = raw.get("correlations", {})
    if corr.get("recall_vs_avg_path_length") is not None:
        lines.append(f"pearson(recall, path length) = {corr['recall_vs_avg_path_length']:.3f}")
    _emit(args, raw, "\n".join(lines) if lines else "empty report")
    return 0


# -- parser ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hnswlab",
        description="HNSW insertion-order laboratory",
    )
    parser.add_argument("--version", action="version", version=f"hnswlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("synth-gen", formatter_class=fmt, help="generate a synthetic dataset")
    p.add_argument("--d", type=int, required=True, help="ambient dimension")
    p.add_argument("--k", type=int, required=True, help="number of orthonormal basis vectors")
    p.add_argument("--n", type=int, required=True, help="number of vectors")
    p.add_argument("--seed", type=int, default=0, help="generator seed")
    p.add_argument("--out", required=True, help="output fvecs path")
    p.add_argument("--queries-out", default=None, help="optional fvecs path for a query set")
    p.add_argument("--n-q", type=int, default=1000, help="query count for --queries-out")
    _add_common(p)
    p.set_defaults(func=_cmd_synth_gen)

    p = sub.add_parser("id-estimate", formatter_class=fmt, help="PCA intrinsic dimensionality")
    p.add_argument("data", help="fvecs dataset")
    p.add_argument("--theta", type=float, default=0.99, help="cumulative variance threshold")
    p.add_argument("--csv", default=None, help="write the cumulative variance curve here")
    _add_common(p)
    p.set_defaults(func=_cmd_id_estimate)

    p = sub.add_parser("lid-profile", formatter_class=fmt, help="pointwise LID over exact neighbours")
    p.add_argument("data", help="fvecs dataset")
    p.add_argument("--k-neighbours", type=int, default=100, help="neighbours per point")
    _metric_arg(p)
    p.add_argument("--out", required=True, help="binary profile output path")
    _add_common(p)
    p.set_defaults(func=_cmd_lid_profile)

    p = sub.add_parser("exact-baseline", formatter_class=fmt, help="exact top-k ground truth")
    p.add_argument("--data", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--k", type=int, default=10, help="results per query")
    _metric_arg(p)
    p.add_argument("--out", default=None, help="baseline output path")
    p.add_argument("--cache-dir", default=None, help=f"cache directory (or ${_ENV_CACHE})")
    _add_common(p)
    p.set_defaults(func=_cmd_exact_baseline)

    p = sub.add_parser("build", formatter_class=fmt, help="build an index")
    p.add_argument("--data", required=True)
    p.add_argument("--order", default=None, help="order plan file; default random order")
    p.add_argument("--seed", type=int, default=0, help="random-order seed when no plan given")
    p.add_argument("--M", type=int, default=16, help="links per node per layer")
    p.add_argument("--ef-construction", type=int, default=128, help="construction beam width")
    p.add_argument("--level-seed", type=int, default=0, help="level assignment seed")
    p.add_argument(
        "--neighbor-select",
        choices=[s.value for s in NeighborSelect],
        default=NeighborSelect.HEURISTIC.value,
        help="neighbour selection rule",
    )
    _metric_arg(p)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=_cmd_build)

    p = sub.add_parser("search-eval", formatter_class=fmt, help="recall of an index vs the oracle")
    p.add_argument("--index", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--baseline", default=None, help="baseline file; computed when omitted")
    p.add_argument("--k", type=int, default=10)
    p.add_argument(
        "--ef-search",
        type=int,
        action="append",
        default=None,
        help="search beam width; repeatable (default 10)",
    )
    p.add_argument("--cache-dir", default=None, help=f"cache directory (or ${_ENV_CACHE})")
    _add_common(p)
    p.set_defaults(func=_cmd_search_eval)

    p = sub.add_parser("graph-stats", formatter_class=fmt, help="layer-0 path length and degrees")
    p.add_argument("--index", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--sample-sources", type=int, default=64, help="BFS source sample size")
    p.add_argument("--seed", type=int, default=0, help="source sampling seed")
    _add_common(p)
    p.set_defaults(func=_cmd_graph_stats)

    p = sub.add_parser("experiment", formatter_class=fmt, help="run a config-driven experiment")
    p.add_argument("--config", required=True, help="ExperimentConfig JSON")
    p.add_argument("--output-dir", default=None, help="override the config output directory")
    p.add_argument("--threads", type=int, default=None, help="worker count (0 = auto)")
    _add_common(p)
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("report", formatter_class=fmt, help="summarize a report.json")
    p.add_argument("report", help="report.json path")
    p.add_argument("--csv-dir", default=None, help="re-emit CSV files here")
    _add_common(p)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    _echo_config(args)
    try:
        return args.func(args)
    except ValueError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 2
    except (DataError, FileNotFoundError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return 3
    except InvariantError as e:
        print(f"internal invariant violated: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
