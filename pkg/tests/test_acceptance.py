"""Acceptance suite: one test per criterion, one printed PASS/FAIL line each.

The heavy criteria parallelize their (order, ef) cells across local CPUs;
every assertion tolerance is pinned here, not computed.
"""

import math
import os
import time

import numpy as np
import pytest

from conftest import session_elapsed
from hnswlab import io as hio
from hnswlab import lab, metrics
from hnswlab.dataset import Dataset
from hnswlab.dimest import lid_mle, lid_profile, pca_intrinsic_dim
from hnswlab.hnsw import HnswParams, build
from hnswlab.knn import exact_search
from hnswlab.orders import order_random
from hnswlab.synth import split_seed
from hnswlab.vecmath import Metric, gram_schmidt

NJOBS = min(8, os.cpu_count() or 1)


def _report(name: str, ok: bool, detail: str) -> None:
    print(f"\n{name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"{name}: {detail}"


def _ac2_data(seed: int):
    """Mixture: 8 clusters of 1,000 points in random 8-dim subspaces of R^256
    plus 2,000 full-rank background points; queries from the same process."""
    basis_seed, data_seed, query_seed, level_seed = split_seed(1000 + seed, 4)
    ks = [8] * 8 + [256]
    bases = lab.make_mixture_bases(256, ks, basis_seed)
    X = lab.mixture_from_bases(bases, [1000] * 8 + [2000], data_seed)
    Q = lab.mixture_from_bases(bases, [100] * 8 + [100], query_seed)
    return X, Q, level_seed


def test_ac1_synthetic_recall_degrades_with_basis_count():
    """AC-1: recall@10 falls strictly as the basis count grows, per seed."""
    counts = [4, 16, 64, 256]
    seeds = [101, 102, 103]
    rows = lab.synthetic_id_sweep(
        d=256,
        n=10_000,
        n_q=1_000,
        basis_counts=counts,
        ef_search=40,
        k=10,
        M=16,
        ef_construction=128,
        seeds=seeds,
        metric=Metric.L2,
        n_jobs=NJOBS,
    )
    details = []
    ok = True
    for seed in seeds:
        recall = {
            r["basis_count"]: r["mean_recall"] for r in rows if r["seed"] == seed
        }
        series = [recall[c] for c in counts]
        strictly_decreasing = all(a > b for a, b in zip(series, series[1:]))
        ok &= strictly_decreasing
        ok &= recall[4] >= 0.95
        ok &= recall[256] <= recall[4] - 0.25
        details.append(f"seed {seed}: " + " > ".join(f"{v:.3f}" for v in series))
    _report("AC-1", ok, "; ".join(details))


def test_ac2_lid_order_effect_on_mixture():
    """AC-2: descending-LID insertion beats ascending on the mixture dataset."""
    per_seed = {}
    for seed in range(5):
        X, Q, level_seed = _ac2_data(seed)
        params = HnswParams(
            M=16, ef_construction=128, seed=level_seed, metric=Metric.COSINE
        )
        out = lab.lid_order_study(
            X,
            Q,
            params,
            ef_search_values=(10,),
            k=10,
            seed=seed,
            lid_neighbours=100,
            n_jobs=NJOBS,
            replicates=2,
        )
        per_seed[seed] = {
            o: out["summary"][(o, 10)] for o in ("lid_desc", "lid_asc", "random")
        }
    gaps = [m["lid_desc"] - m["lid_asc"] for m in per_seed.values()]
    n_gap = sum(g >= 0 for g in gaps)
    n_mid = sum(
        m["lid_asc"] <= m["random"] <= m["lid_desc"] for m in per_seed.values()
    )
    ok = n_gap >= 4 and float(np.mean(gaps)) > 0 and n_mid >= 3
    _report(
        "AC-2",
        ok,
        f"desc>=asc in {n_gap}/5 seeds, mean gap {np.mean(gaps):+.4f}, "
        f"random in between in {n_mid}/5 seeds",
    )


def test_ac3_full_ef_matches_oracle():
    """AC-3: ef_search = n recovers the exact top-10 on a connected graph."""
    rng = np.random.default_rng(33)
    X = Dataset(rng.standard_normal((2_000, 32)))
    Q = rng.standard_normal((200, 32))
    params = HnswParams(M=16, ef_construction=128, seed=7)
    index = build(X, order_random(X.ids, 8), params)
    components = index.graph_stats(64, 0).connected_components
    acc = 0.0
    for q in Q:
        got, _ = index.search(q, 10, 2_000)
        want = exact_search(X, q, 10)
        acc += len(set(got.ids.tolist()) & set(want.ids.tolist())) / 10
    recall = acc / len(Q)
    ok = recall >= 0.999 and (recall == 1.0 or components > 1)
    _report("AC-3", ok, f"recall {recall:.6f}, layer-0 components {components}")


def test_ac4_numerics():
    """AC-4: orthonormality, PCA-vs-eigen equality, MLE formula fidelity."""
    # gram_schmidt orthonormality over 100 seeds
    worst = 0.0
    for seed in range(100):
        g = np.random.default_rng(seed)
        k, d = int(g.integers(1, 12)), int(g.integers(12, 48))
        U = gram_schmidt(g.standard_normal((k, d)))
        worst = max(worst, float(np.abs(U @ U.T - np.eye(k)).max()))
    ok = worst <= 1e-6

    # pca_intrinsic_dim equals a dense eigendecomposition oracle, exactly
    from test_dimest import eigen_oracle_k_intrinsic

    pca_equal = 0
    for seed in range(20):
        g = np.random.default_rng(500 + seed)
        n, d = int(g.integers(20, 120)), int(g.integers(4, 40))
        X = g.standard_normal((n, d))
        theta = float(g.uniform(0.4, 1.0))
        pca_equal += (
            pca_intrinsic_dim(X, theta).k_intrinsic == eigen_oracle_k_intrinsic(X, theta)
        )
    ok &= pca_equal == 20

    # lid_mle against a literal formula evaluation on 1,000 random vectors
    from test_dimest import mle_formula_oracle

    mle_worst = 0.0
    for seed in range(1_000):
        g = np.random.default_rng(2_000 + seed)
        T = np.sort(g.uniform(1e-3, 50.0, size=int(g.integers(2, 150))))
        a, b = lid_mle(T), mle_formula_oracle(T)
        mle_worst = max(mle_worst, abs(a - b) / max(abs(b), 1.0))
    ok &= mle_worst <= 1e-9

    # scale invariance within 1e-12 (relative)
    scale_worst = 0.0
    for seed in range(200):
        g = np.random.default_rng(3_000 + seed)
        T = np.sort(g.uniform(0.5, 3.0, size=60))
        c = float(g.uniform(1e-6, 1e6))
        a, b = lid_mle(c * T), lid_mle(T)
        scale_worst = max(scale_worst, abs(a - b) / abs(b))
    ok &= scale_worst <= 1e-12

    _report(
        "AC-4",
        ok,
        f"orthonormality err {worst:.2e}, pca==oracle {pca_equal}/20, "
        f"mle rel err {mle_worst:.2e}, scale rel err {scale_worst:.2e}",
    )


def test_ac5_metrics_and_monotone_ef():
    """AC-5: metric hand cases, zero-sum rank shifts, monotone-ef trend."""
    ok = metrics.recall_at_k(list(range(10)), list(range(10)), 10) == 1.0
    ok &= metrics.recall_at_k(list(range(10)), list(range(10, 20)), 10) == 0.0
    approx = list(range(5)) + list(range(100, 105))
    ok &= metrics.recall_at_k(approx, list(range(10)), 10) == 0.5
    ok &= metrics.mean_recall([1.0, 0.5]) == 0.75

    qrels = {"d0": 0, "d1": 2, "d2": 1}
    got = metrics.ndcg_at_k(["d0", "d1", "d2"], qrels, 3)
    want = (2 / math.log2(3) + 1 / math.log2(4)) / (2 + 1 / math.log2(3))
    ok &= abs(got - want) < 1e-12
    ok &= metrics.ndcg_at_k(["d1", "d2", "d0"], qrels, 3) == 1.0
    ok &= metrics.ndcg_at_k(["x", "y"], {"a": 1}, 2) == 0.0

    ok &= metrics.pearson([1, 2, 3], [1, 3, 2]) == pytest.approx(0.5, abs=1e-12)
    ok &= metrics.pearson([1, 2, 3], [3, 5, 7]) == pytest.approx(1.0, abs=1e-12)
    ok &= metrics.pearson([1, 2, 3], [-1, -2, -3]) == pytest.approx(-1.0, abs=1e-12)

    g = np.random.default_rng(11)
    zero_sums = 0
    for _ in range(100):
        names = [f"m{i}" for i in range(int(g.integers(2, 24)))]
        exact = {n: float(g.random()) for n in names}
        noisy = {n: float(g.random()) for n in names}
        zero_sums += sum(metrics.rank_change(exact, noisy).values()) == 0
    ok &= zero_sums == 100

    # monotone-ef property on the AC-2 mixture (seed 0)
    X, Q, level_seed = _ac2_data(0)
    params = HnswParams(M=16, ef_construction=128, seed=level_seed, metric=Metric.COSINE)
    index = build(X, order_random(X.ids, 77), params)
    baseline = hio.compute_baseline(X, Q, 10, Metric.COSINE)
    recalls = []
    for ef in (10, 20, 40, 80):
        acc = 0.0
        for qi, q in enumerate(Q.vectors):
            got, _ = index.search(q, 10, ef)
            acc += len(set(got.ids.tolist()) & set(baseline.ids[qi].tolist())) / 10
        recalls.append(acc / len(Q))
    monotone = all(hi >= lo - 0.002 for lo, hi in zip(recalls, recalls[1:]))
    monotone &= recalls[-1] >= recalls[0]
    ok &= monotone
    _report(
        "AC-5",
        ok,
        f"hand cases ok, {zero_sums}/100 zero-sum boards, "
        f"ef recall trend {[round(r, 4) for r in recalls]}",
    )


def test_ac6_category_order_effect():
    """AC-6: category sequences move recall; categories have lower intrinsic dim."""
    from itertools import permutations

    sequences = [list(p) for p in permutations(["a", "b", "c"])]
    spreads = []
    ok = True
    for seed in range(3):
        basis_seed, data_seed, query_seed, level_seed = split_seed(7000 + seed, 4)
        bases = lab.make_mixture_bases(128, [4, 8, 16], basis_seed, orthogonal=True)
        X = lab.mixture_from_bases(
            bases, [2000, 2000, 2000], data_seed, labels=["a", "b", "c"]
        )
        Q = lab.mixture_from_bases(bases, [200, 200, 200], query_seed)
        params = HnswParams(M=16, ef_construction=128, seed=level_seed)
        out = lab.category_order_study(
            X,
            X.categories,
            sequences,
            params,
            Q,
            ef_search_values=(10,),
            k=10,
            seed=seed,
            n_jobs=NJOBS,
        )
        recalls = [r["mean_recall"] for r in out["rows"]]
        spreads.append(max(recalls) - min(recalls))
        whole = out["whole_set_k_intrinsic"]
        ok &= all(v < whole for v in out["per_category_k_intrinsic"].values())
    mean_spread = float(np.mean(spreads))
    ok &= mean_spread > 0.0
    _report(
        "AC-6",
        ok,
        f"mean max-min recall spread {mean_spread:.4f} over 6 sequences x 3 seeds; "
        f"per-category dims below whole-set dim",
    )


def test_ac7_persistence_and_rerun_determinism():
    """AC-7: artifact round trips are exact; manifest reruns match bit-for-bit."""
    import tempfile
    from pathlib import Path

    rng = np.random.default_rng(4)
    X = Dataset(rng.standard_normal((400, 12)))
    Q = Dataset(rng.standard_normal((30, 12)))
    params = HnswParams(M=6, ef_construction=24, seed=3)
    index = build(X, order_random(X.ids, 5), params)
    ok = True
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        hio.save_index(tmp / "i.bin", index)
        loaded = hio.load_index(tmp / "i.bin", X)
        for _ in range(10):
            q = rng.standard_normal(12)
            a, _ = index.search(q, 5, 25)
            b, _ = loaded.search(q, 5, 25)
            ok &= a.ids.tolist() == b.ids.tolist()
            ok &= a.distances.tolist() == b.distances.tolist()

        baseline = hio.compute_baseline(X, Q, 5, Metric.L2)
        hio.save_baseline(tmp / "b.bin", baseline)
        again = hio.load_baseline(tmp / "b.bin")
        ok &= np.array_equal(again.ids, baseline.ids)
        ok &= np.array_equal(again.distances, baseline.distances)

        profile = lid_profile(X, 20)
        hio.save_lid_profile(tmp / "p.bin", profile, X.content_hash())
        p2 = hio.load_lid_profile(tmp / "p.bin")
        ok &= np.array_equal(p2.lid, profile.lid)
        ok &= np.array_equal(p2.neighbour_distances, profile.neighbour_distances)

    cfg = lab.ExperimentConfig(
        dataset={"synth": {"d": 24, "k": 6, "n": 500, "seed": 1}},
        queries={"synth": {"d": 24, "k": 6, "n": 50, "seed": 2}},
        orders=[{"strategy": "random", "seed": 3}, {"strategy": "lid_asc"}],
        ef_search=(10, 20),
        k=5,
        M=4,
        ef_construction=16,
        lid_neighbours=25,
        seed=8,
        threads=NJOBS,
    )
    report = lab.run_experiment(cfg)
    rerun = lab.run_manifest(lab.manifest_from_report(report))
    ok &= lab.comparable_report_fields(report.to_dict()) == lab.comparable_report_fields(
        rerun.to_dict()
    )
    _report("AC-7", ok, "index/baseline/profile round trips exact; manifest rerun identical")


def test_ac8_desk_scale_budget():
    """AC-8: LID profiling speed and overall suite wall time."""
    basis_seed, data_seed = split_seed(900, 2)
    bases = lab.make_mixture_bases(256, [16] * 4, basis_seed)
    X = lab.mixture_from_bases(bases, [2500] * 4, data_seed)
    t0 = time.monotonic()
    lid_profile(X, 100)
    lid_seconds = time.monotonic() - t0
    elapsed = session_elapsed()
    ok = lid_seconds <= 300.0 and elapsed <= 45 * 60
    _report(
        "AC-8",
        ok,
        f"LID of 10,000 x 256 in {lid_seconds:.1f}s (limit 300s); "
        f"suite at {elapsed / 60:.1f} min so far (limit 45 min)",
    )
