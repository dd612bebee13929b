"""End-to-end runs of the command line driver, in process via main(argv)."""

import json
import os
import shutil

import numpy as np
import pytest

from schatpack.cli import main
from schatpack.datagen import (
    AdversaryStrategy,
    make_corrupted_dataset,
    make_spiked_covariance,
)
from schatpack.io import (
    RESULT_COLUMNS,
    read_json,
    read_results_csv,
    write_dataset,
    write_lp_instance,
    write_sdp_instance,
)

LP_ARGS = ["solve-lp", "--n", "10", "--d", "4", "--eps", "0.2", "--seed", "3"]


def _rows(out_dir):
    return read_results_csv(os.path.join(out_dir, "results.csv"))


def _summary(out_dir):
    return read_json(os.path.join(out_dir, "summary.json"))


@pytest.fixture(scope="module")
def lp_run(tmp_path_factory):
    out = str(tmp_path_factory.mktemp("cli") / "lp-run")
    assert main(LP_ARGS + ["--out", out, "--trace"]) == 0
    return out


class TestSolveLp:
    def test_artifacts_and_summary(self, lp_run):
        assert os.path.isfile(os.path.join(lp_run, "results.csv"))
        rows = _rows(lp_run)
        assert len(rows) == 1
        assert tuple(rows[0]) == RESULT_COLUMNS
        assert rows[0]["verdict"] == "primal"
        assert rows[0]["seed"] == "3" and rows[0]["n"] == "10" and rows[0]["d"] == "4"
        summary = _summary(lp_run)
        assert summary["all_ok"] is True
        assert summary["certificate_failures"] == 0
        assert summary["monotone_violations"] == 0
        assert summary["config"]["eps"] == 0.2
        assert summary["config"]["p"] == "inf"
        assert summary["certificates"][0]["kind"] == "primal"

    def test_score_is_17_digit_roundtrip(self, lp_run):
        row = _rows(lp_run)[0]
        assert row["score"] != ""
        assert f"{float(row['score']):.17g}" == row["score"]
        float(row["wall_time"])
        assert row["iterations"].isdigit()

    def test_rerun_identical_except_wall_time(self, lp_run, tmp_path):
        out2 = str(tmp_path / "again")
        assert main(LP_ARGS + ["--out", out2]) == 0
        first, second = _rows(lp_run)[0], _rows(out2)[0]
        for col in RESULT_COLUMNS:
            if col != "wall_time":
                assert first[col] == second[col], col

    def test_trace_file(self, lp_run):
        lines = open(os.path.join(lp_run, "trace.csv")).read().splitlines()
        assert lines[0] == "iteration,potential,l1"
        assert len(lines) >= 3 and lines[1].startswith("0,")
        phi = np.array([float(ln.split(",")[1]) for ln in lines[1:]])
        slack = 1e-9 * np.maximum(1.0, np.abs(phi[:-1]))
        assert np.all(phi[1:] <= phi[:-1] + slack)

    def test_stdout_reports_certificate(self, tmp_path, capsys):
        out = str(tmp_path / "o")
        assert main(LP_ARGS + ["--out", out]) == 0
        stdout = capsys.readouterr().out
        assert "solve-lp row 0: verdict=primal certificate=pass" in stdout

    def test_finite_p_flag(self, tmp_path):
        out = str(tmp_path / "p3")
        rc = main(["solve-lp", "--n", "8", "--d", "3", "--eps", "0.25",
                   "--p", "3", "--seed", "1", "--out", out])
        assert rc == 0
        assert _summary(out)["config"]["p"] == 3

    def test_instance_file(self, tmp_path, rng):
        path = str(tmp_path / "inst.csv")
        write_lp_instance(path, rng.uniform(0.0, 1.0, (3, 6)))
        out = str(tmp_path / "o")
        assert main(["solve-lp", "--instance", path, "--eps", "0.25", "--out", out]) == 0
        row = _rows(out)[0]
        assert row["n"] == "6" and row["d"] == "3"


class TestSolveSdp:
    def test_exact_rank1(self, tmp_path):
        out = str(tmp_path / "o")
        rc = main(["solve-sdp", "--n", "8", "--d", "3", "--eps", "0.25",
                   "--seed", "1", "--out", out])
        assert rc == 0
        assert _rows(out)[0]["verdict"] in ("primal", "dual")
        assert _summary(out)["all_ok"] is True

    def test_sketched_dense(self, tmp_path):
        out = str(tmp_path / "o")
        rc = main(["solve-sdp", "--n", "6", "--d", "3", "--eps", "0.25",
                   "--form", "dense", "--mode", "sketched", "--seed", "2", "--out", out])
        assert rc == 0
        assert _summary(out)["all_ok"] is True

    def test_instance_directory(self, tmp_path, rng):
        b = rng.standard_normal((5, 3, 3))
        mats = np.einsum("nij,nkj->nik", b, b) / 3.0
        inst = str(tmp_path / "inst")
        write_sdp_instance(inst, mats)
        out = str(tmp_path / "o")
        rc = main(["solve-sdp", "--instance", inst, "--eps", "0.25", "--out", out])
        assert rc == 0
        row = _rows(out)[0]
        assert row["n"] == "5" and row["d"] == "3"


class TestSolveBoxed:
    def test_decide_with_trace(self, tmp_path):
        out = str(tmp_path / "o")
        rc = main(["solve-boxed", "--n", "8", "--d", "3", "--eps", "0.25",
                   "--alpha", "0.25", "--seed", "2", "--out", out, "--trace"])
        assert rc == 0
        row = _rows(out)[0]
        assert row["verdict"] in ("primal", "infeasible")
        header = open(os.path.join(out, "trace.csv")).readline().rstrip("\n")
        assert header == "iteration,potential,l1,norm_a,norm_b"

    def test_optimize_bisect(self, tmp_path, capsys):
        out = str(tmp_path / "o")
        rc = main(["solve-boxed", "--mode", "optimize", "--n", "4", "--d", "2",
                   "--eps", "0.4", "--alpha", "0.4", "--seed", "0",
                   "--out", out, "--trace"])
        assert rc == 0
        row = _rows(out)[0]
        assert row["verdict"] == "optimized"
        assert float(row["score"]) > 0.0
        cert = _summary(out)["certificates"][0]
        assert cert["ok"] is True
        assert "floor_certified" in cert and "budget_hit" in cert
        assert not os.path.exists(os.path.join(out, "trace.csv"))
        assert "decide mode only" in capsys.readouterr().err


class TestPcaCommands:
    def test_filter_with_naive_baseline(self, tmp_path):
        out = str(tmp_path / "o")
        rc = main(["pca-filter", "--n", "300", "--d", "4", "--eps", "0.05",
                   "--seed", "0", "--naive-baseline", "--trace", "--out", out])
        assert rc == 0
        rows = _rows(out)
        assert len(rows) == 2
        assert rows[0]["verdict"] in ("ok", "capped")
        assert rows[1]["verdict"] == "naive" and rows[1]["iterations"] == "0"
        # the spiked adversary drags the naive eigenvector off the true axis
        assert float(rows[0]["score"]) > float(rows[1]["score"])
        summary = _summary(out)
        assert summary["invariant_violations"] == {"weight_monotone": 0, "weight_bound": 0}
        header = open(os.path.join(out, "trace.csv")).readline().rstrip("\n")
        assert header == "iteration,quad,sigma_robust,ratio,suffix_size"

    def test_fast(self, tmp_path):
        out = str(tmp_path / "o")
        rc = main(["pca-fast", "--n", "200", "--d", "4", "--eps", "0.05",
                   "--seed", "1", "--candidates", "2", "--out", out])
        assert rc == 0
        row = _rows(out)[0]
        assert row["verdict"] in ("ok", "budget", "partial")
        assert 0.0 < float(row["score"]) <= 1.0 + 1e-9
        assert _summary(out)["invariant_violations"]["weight_bound"] == 0

    def test_dataset_file(self, tmp_path):
        spec = make_spiked_covariance(4, 10.0)
        strategy = AdversaryStrategy.direction_spike(np.array([0.0, 1.0, 0, 0]), 15.0)
        data = make_corrupted_dataset(spec, 250, 0.05, strategy, seed=4)
        path = str(tmp_path / "data.csv")
        write_dataset(path, data)
        out = str(tmp_path / "o")
        rc = main(["pca-filter", "--dataset", path, "--eps", "0.05", "--out", out])
        assert rc == 0
        assert _rows(out)[0]["score"] != ""


class TestSweep:
    def test_rows_sorted_by_eps_then_seed(self, tmp_path):
        out = str(tmp_path / "o")
        rc = main(["sweep", "--task", "pca-filter", "--eps-values", "0.1,0.05",
                   "--seeds", "1,0", "--n", "150", "--d", "3", "--out", out])
        assert rc == 0
        rows = _rows(out)
        assert [float(r["eps"]) for r in rows] == [0.05, 0.05, 0.1, 0.1]
        assert [r["seed"] for r in rows] == ["0", "1", "0", "1"]
        assert _summary(out)["rows"] == 4


class TestCheck:
    def test_passes_on_untouched_run(self, lp_run, capsys):
        assert main(["check", lp_run]) == 0
        assert "reproduced exactly" in capsys.readouterr().out

    def test_accepts_summary_path(self, lp_run):
        assert main(["check", os.path.join(lp_run, "summary.json")]) == 0

    def test_detects_tampered_score(self, lp_run, tmp_path, capsys):
        copy = str(tmp_path / "copy")
        shutil.copytree(lp_run, copy)
        results = os.path.join(copy, "results.csv")
        lines = open(results).read().splitlines()
        fields = lines[1].split(",")
        fields[RESULT_COLUMNS.index("score")] = "999"
        lines[1] = ",".join(fields)
        with open(results, "w") as fh:
            fh.write("\n".join(lines) + "\n")
        assert main(["check", copy]) == 2
        assert "column score" in capsys.readouterr().out

    def test_missing_run(self, tmp_path, capsys):
        assert main(["check", str(tmp_path / "nope")]) == 1
        assert "usage error" in capsys.readouterr().err

    def test_requires_embedded_config(self, tmp_path, capsys):
        (tmp_path / "summary.json").write_text('{"task": "solve-lp"}\n')
        assert main(["check", str(tmp_path)]) == 1
        assert "runnable config" in capsys.readouterr().err


class TestConfigPrecedence:
    def test_flags_beat_config_beat_defaults(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(
            {"eps": 0.3, "seed": 5, "generate": {"n": 12, "d": 3}}
        ))
        out = str(tmp_path / "o")
        rc = main(["solve-lp", "--config", str(cfg_path), "--eps", "0.15",
                   "--d", "4", "--out", out])
        assert rc == 0
        cfg = _summary(out)["config"]
        assert cfg["eps"] == 0.15          # flag wins
        assert cfg["seed"] == 5            # config wins over default 0
        assert cfg["generate"]["n"] == 12  # config
        assert cfg["generate"]["d"] == 4   # flag wins inside generate
        assert cfg["p"] == "inf"           # untouched default

    def test_unknown_key_rejected(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text('{"bogus": 1}')
        assert main(["solve-lp", "--config", str(cfg_path)]) == 1
        assert "unknown field 'bogus'" in capsys.readouterr().err

    def test_unknown_generate_subkey_rejected(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text('{"generate": {"q": 2}}')
        assert main(["solve-lp", "--config", str(cfg_path)]) == 1
        assert "generate.q" in capsys.readouterr().err

    def test_invalid_json_rejected(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text("{nope")
        assert main(["solve-lp", "--config", str(cfg_path)]) == 1
        assert "invalid JSON" in capsys.readouterr().err

    def test_non_object_config_rejected(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text("[1, 2]")
        assert main(["solve-lp", "--config", str(cfg_path)]) == 1


class TestUsageErrors:
    def test_missing_instance_path(self, capsys):
        assert main(["solve-lp", "--instance", "/nonexistent/inst.csv"]) == 1
        assert "does not exist" in capsys.readouterr().err

    def test_unparseable_p(self, capsys):
        assert main(["solve-lp", "--p", "banana"]) == 1
        assert "usage error" in capsys.readouterr().err

    def test_solver_rejects_even_p(self, tmp_path, capsys):
        out = str(tmp_path / "o")
        rc = main(["solve-sdp", "--n", "4", "--d", "2", "--p", "4", "--out", out])
        assert rc == 1
        assert capsys.readouterr().err.startswith("error:")

    def test_bad_subcommand_choice(self, capsys):
        assert main(["solve-sdp", "--mode", "nope"]) == 1
        assert "usage error" in capsys.readouterr().err

    def test_bad_eps_values_list(self, capsys):
        assert main(["sweep", "--eps-values", "0.1,x"]) == 1
        assert "comma-separated numbers" in capsys.readouterr().err


class TestSeedEnvironment:
    def test_env_seed_is_default(self, tmp_path, monkeypatch):
        monkeypatch.setenv("SCHATPACK_SEED", "7")
        out = str(tmp_path / "o")
        rc = main(["solve-lp", "--n", "8", "--d", "3", "--eps", "0.25", "--out", out])
        assert rc == 0
        assert _rows(out)[0]["seed"] == "7"
        assert _summary(out)["config"]["seed"] == 7

    def test_flag_beats_env_seed(self, tmp_path, monkeypatch):
        monkeypatch.setenv("SCHATPACK_SEED", "7")
        out = str(tmp_path / "o")
        rc = main(["solve-lp", "--n", "8", "--d", "3", "--eps", "0.25",
                   "--seed", "2", "--out", out])
        assert rc == 0
        assert _rows(out)[0]["seed"] == "2"

    def test_invalid_env_seed(self, monkeypatch, capsys):
        monkeypatch.setenv("SCHATPACK_SEED", "abc")
        assert main(["solve-lp"]) == 1
        assert "SCHATPACK_SEED" in capsys.readouterr().err
