import json

import numpy as np
import pytest

from hnswlab import io as hio
from hnswlab.cli import main
from hnswlab.dataset import Dataset


@pytest.fixture
def workdir(tmp_path, rng):
    """A tiny dataset + query set on disk."""
    X = Dataset(rng.standard_normal((200, 8)))
    Q = Dataset(rng.standard_normal((20, 8)))
    data = tmp_path / "data.fvecs"
    queries = tmp_path / "queries.fvecs"
    hio.write_fvecs(X, data)
    hio.write_fvecs(Q, queries)
    return tmp_path


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestSynthGen:
    def test_writes_dataset_and_sidecar(self, tmp_path, capsys):
        out = tmp_path / "synth.fvecs"
        code, _, err = run_cli(
            capsys,
            "synth-gen", "--d", "16", "--k", "4", "--n", "100",
            "--seed", "3", "--out", str(out),
        )
        assert code == 0
        assert "config:" in err
        X = hio.read_fvecs(out)
        assert X.vectors.shape == (100, 16)
        sidecar = json.loads((tmp_path / "synth.fvecs.json").read_text())
        assert sidecar["k"] == 4

    def test_idempotent_given_seed(self, tmp_path, capsys):
        out = tmp_path / "a.fvecs"
        run_cli(capsys, "synth-gen", "--d", "8", "--k", "2", "--n", "50",
                "--seed", "1", "--out", str(out))
        first = out.read_bytes()
        run_cli(capsys, "synth-gen", "--d", "8", "--k", "2", "--n", "50",
                "--seed", "1", "--out", str(out))
        assert out.read_bytes() == first

    def test_json_output(self, tmp_path, capsys):
        out = tmp_path / "a.fvecs"
        code, stdout, _ = run_cli(
            capsys, "synth-gen", "--d", "8", "--k", "2", "--n", "10",
            "--out", str(out), "--json",
        )
        assert code == 0
        assert json.loads(stdout)["n"] == 10


class TestIdEstimate:
    def test_prints_k_intrinsic_and_curve(self, tmp_path, capsys):
        out = tmp_path / "s.fvecs"
        run_cli(capsys, "synth-gen", "--d", "16", "--k", "3", "--n", "200",
                "--seed", "2", "--out", str(out))
        csv = tmp_path / "curve.csv"
        code, stdout, _ = run_cli(
            capsys, "id-estimate", str(out), "--theta", "0.99", "--csv", str(csv), "--json"
        )
        assert code == 0
        payload = json.loads(stdout)
        assert payload["k_intrinsic"] <= 3
        header = csv.read_text().splitlines()[0]
        assert header == "component,explained_variance_ratio,cumulative"

    def test_missing_file_is_data_error(self, tmp_path, capsys):
        code, _, err = run_cli(capsys, "id-estimate", str(tmp_path / "nope.fvecs"))
        assert code == 3
        assert "data error" in err


class TestPipeline:
    def test_full_flow(self, workdir, capsys):
        data = workdir / "data.fvecs"
        queries = workdir / "queries.fvecs"
        profile = workdir / "profile.bin"
        baseline = workdir / "baseline.bin"
        index = workdir / "index.bin"

        code, stdout, _ = run_cli(
            capsys, "lid-profile", str(data), "--k-neighbours", "20",
            "--out", str(profile), "--json",
        )
        assert code == 0
        assert json.loads(stdout)["points"] == 200
        assert (workdir / "profile.bin.json").exists()

        code, _, _ = run_cli(
            capsys, "exact-baseline", "--data", str(data), "--queries", str(queries),
            "--k", "10", "--out", str(baseline),
        )
        assert code == 0

        code, _, _ = run_cli(
            capsys, "build", "--data", str(data), "--M", "4",
            "--ef-construction", "16", "--out", str(index),
        )
        assert code == 0

        code, stdout, _ = run_cli(
            capsys, "search-eval", "--index", str(index), "--data", str(data),
            "--queries", str(queries), "--baseline", str(baseline),
            "--ef-search", "10", "--ef-search", "40", "--json",
        )
        assert code == 0
        rows = json.loads(stdout)["rows"]
        assert len(rows) == 2
        assert all(0.0 <= r["mean_recall"] <= 1.0 for r in rows)

        code, stdout, _ = run_cli(
            capsys, "graph-stats", "--index", str(index), "--data", str(data), "--json"
        )
        assert code == 0
        stats = json.loads(stdout)
        assert stats["connected_components"] >= 1

    def test_build_m1_is_usage_error(self, workdir, capsys):
        code, _, err = run_cli(
            capsys, "build", "--data", str(workdir / "data.fvecs"),
            "--M", "1", "--out", str(workdir / "i.bin"),
        )
        assert code == 2
        assert "usage error" in err

    def test_unknown_flag_exits_2(self, workdir):
        with pytest.raises(SystemExit) as exc:
            main(["build", "--data", "x", "--bogus-flag", "1"])
        assert exc.value.code == 2


class TestExperimentCommand:
    def test_runs_config_and_writes_outputs(self, tmp_path, capsys):
        cfg = {
            "dataset": {"synth": {"d": 16, "k": 4, "n": 200, "seed": 1}},
            "queries": {"synth": {"d": 16, "k": 4, "n": 25, "seed": 2}},
            "orders": [{"strategy": "random", "seed": 5}],
            "ef_search": [10],
            "k": 5,
            "M": 4,
            "ef_construction": 16,
            "seed": 9,
        }
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        out_dir = tmp_path / "out"
        code, stdout, _ = run_cli(
            capsys, "experiment", "--config", str(cfg_path),
            "--output-dir", str(out_dir), "--json",
        )
        assert code == 0
        report = json.loads(stdout)
        assert len(report["cells"]) == 1
        assert (out_dir / "report.json").exists()
        assert (out_dir / "manifest.json").exists()

        code, stdout, _ = run_cli(capsys, "report", str(out_dir / "report.json"))
        assert code == 0
        assert "random" in stdout

    def test_bad_config_key_usage_error(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"nonsense": True}))
        code, _, err = run_cli(capsys, "experiment", "--config", str(cfg_path))
        assert code == 2
