import json
import os

import numpy as np
import pytest

import ike_lab.cli as cli
from ike_lab.errors import ConfigError
from ike_lab.harness import (
    ORDER_PRESETS,
    ExperimentConfig,
    derive_run_seed,
    enumerate_runs,
    expand_presets,
    resolve_order,
    run,
    selftest,
)


def tiny_config(**overrides) -> dict:
    doc = {
        "dataset": {"synthetic": {
            "n_global": 16, "latent_dim": 5, "obs_dim": 5, "n_cameras": 2,
            "ids_per_camera": 8, "images_per_id": 3, "test_images_per_id": 1,
            "camera_shift": 0.2, "noise": 0.03, "seed": 11,
        }},
        "orders": [[0, 1]],
        "variants": ["IKE"],
        "seeds": [0],
        "hyperparams": {"epochs": 2, "batch_size": 8},
        "encoder": {"hidden": [8, 8, 8], "embed_dim": 8},
    }
    doc.update(overrides)
    return doc


class TestConfigValidation:
    def test_valid_config_parses(self):
        cfg = ExperimentConfig.from_dict(tiny_config())
        assert cfg.variants == ["IKE"]
        assert cfg.embed_dim == 8

    @pytest.mark.parametrize("mutate", [
        {"unknown_key": 1},
        {"dataset": {}},
        {"dataset": {"synthetic": {"n_global": 0}}},
        {"variants": ["NOPE"]},
        {"variants": []},
        {"seeds": []},
        {"seeds": [1, 1]},
        {"orders": []},
        {"hyperparams": {"tau": -1.0}},
        {"hyperparams": {"bogus": 1}},
        {"sweep": {}},
        {"sweep": {"gamma": [1.0]}},
        {"sweep": {"lambda": []}},
        {"gallery_rule": "nope"},
        {"encoder": {"hidden": [8]}},
        {"encoder": {"bogus": 3}},
    ])
    def test_rejected_before_any_work(self, mutate):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(tiny_config(**mutate))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_file(tmp_path / "none.json")

    def test_invalid_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{nope")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_file(p)


class TestOrders:
    def test_presets_are_six_camera_permutations(self):
        for name, order in ORDER_PRESETS.items():
            assert sorted(order) == list(range(6)), name
        assert ORDER_PRESETS["T1"] == [0, 1, 2, 3, 4, 5]

    def test_resolve_explicit(self):
        name, order = resolve_order([1, 0], 2)
        assert name == "o10"
        assert order == [1, 0]

    def test_resolve_preset_wrong_camera_count(self):
        with pytest.raises(ConfigError):
            resolve_order("T1", 3)

    def test_non_permutation_rejected(self):
        with pytest.raises(ConfigError):
            resolve_order([0, 0], 2)

    def test_expand_presets(self):
        assert expand_presets("T2") == ["T2"]
        assert expand_presets("T1,T3") == ["T1", "T3"]
        assert expand_presets("T1..T5") == ["T1", "T2", "T3", "T4", "T5"]
        with pytest.raises(ConfigError):
            expand_presets("T9")


class TestSeeding:
    def test_stable_under_added_runs(self):
        cfg1 = ExperimentConfig.from_dict(tiny_config())
        cfg2 = ExperimentConfig.from_dict(tiny_config(variants=["BASELINE", "IKE"], seeds=[0, 1]))
        runs1 = {s.run_id: s for s in enumerate_runs(cfg1, 2)}
        runs2 = {s.run_id: s for s in enumerate_runs(cfg2, 2)}
        shared = set(runs1) & set(runs2)
        assert shared
        for rid in shared:
            a = derive_run_seed(runs1[rid]).entropy
            b = derive_run_seed(runs2[rid]).entropy
            assert a == b

    def test_different_runs_different_streams(self):
        cfg = ExperimentConfig.from_dict(tiny_config(variants=["BASELINE", "IKE"]))
        specs = enumerate_runs(cfg, 2)
        seeds = {derive_run_seed(s).entropy for s in specs}
        assert len(seeds) == len(specs)


class TestRun:
    def test_artifacts_written(self, tmp_path):
        cfg = ExperimentConfig.from_dict(tiny_config())
        outcome = run(cfg, out_dir=tmp_path / "out")
        assert (tmp_path / "out" / "summary.csv").exists()
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert len(manifest["runs"]) == 1
        run_dir = tmp_path / "out" / manifest["runs"][0]["path"]
        assert (run_dir / "metrics.json").exists()
        assert (run_dir / "metrics.csv").exists()
        assert (run_dir / "train_log.csv").exists()
        ckpts = sorted((run_dir / "checkpoints").iterdir())
        assert len(ckpts) == 2
        assert (ckpts[0] / "encoder.json").exists()
        assert (ckpts[0] / "memory.json").exists()
        # metrics.csv has one row per camera step
        lines = (run_dir / "metrics.csv").read_text().strip().splitlines()
        assert len(lines) == 3

    def test_single_camera_single_row(self, tmp_path):
        doc = tiny_config()
        doc["dataset"]["synthetic"]["n_cameras"] = 1
        doc["dataset"]["synthetic"]["test_images_per_id"] = 2
        doc["orders"] = [[0]]
        doc["gallery_rule"] = "none"
        cfg = ExperimentConfig.from_dict(doc)
        run(cfg, out_dir=tmp_path / "out")
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        run_dir = tmp_path / "out" / manifest["runs"][0]["path"]
        lines = (run_dir / "metrics.csv").read_text().strip().splitlines()
        assert len(lines) == 2

    def test_ablation_grid_covers_all_variants(self, tmp_path):
        doc = tiny_config(variants=["BASELINE", "IKE_D", "IKE_A", "IKE_U", "IKE_STAR", "IKE"])
        cfg = ExperimentConfig.from_dict(doc)
        outcome = run(cfg, out_dir=tmp_path / "out")
        assert len(outcome.reports) == 6
        summary = (tmp_path / "out" / "summary.csv").read_text().strip().splitlines()
        assert len(summary) == 7
        variants = {line.split(",")[0] for line in summary[1:]}
        assert variants == {"BASELINE", "IKE_D", "IKE_A", "IKE_U", "IKE_STAR", "IKE"}

    def test_sweep_rows(self, tmp_path):
        cfg = ExperimentConfig.from_dict(tiny_config(sweep={"lambda": [0.0, 0.25, 0.5]}))
        outcome = run(cfg, out_dir=tmp_path / "out")
        assert len(outcome.reports) == 3
        summary = (tmp_path / "out" / "summary.csv").read_text().strip().splitlines()
        assert summary[0].split(",")[2] == "lambda"
        assert len(summary) == 4

    def test_every_combination_once(self, tmp_path):
        doc = tiny_config(variants=["BASELINE", "IKE"], seeds=[0, 1])
        cfg = ExperimentConfig.from_dict(doc)
        outcome = run(cfg, out_dir=tmp_path / "out")
        assert len(outcome.reports) == 4
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        ids = [r["run_id"] for r in manifest["runs"]]
        assert len(ids) == len(set(ids)) == 4

    def test_bitwise_identical_reruns(self, tmp_path):
        cfg = ExperimentConfig.from_dict(tiny_config())
        run(cfg, out_dir=tmp_path / "a")
        run(cfg, out_dir=tmp_path / "b")
        ma = json.loads((tmp_path / "a" / "manifest.json").read_text())
        pa = tmp_path / "a" / ma["runs"][0]["path"] / "metrics.json"
        pb = tmp_path / "b" / ma["runs"][0]["path"] / "metrics.json"
        assert pa.read_bytes() == pb.read_bytes()

    def test_parallel_jobs_match_serial(self, tmp_path):
        doc = tiny_config(variants=["BASELINE", "IKE"], seeds=[0, 1])
        cfg = ExperimentConfig.from_dict(doc)
        serial = run(cfg, out_dir=None, jobs=1)
        parallel = run(cfg, out_dir=None, jobs=2)
        for rid, rep in serial.reports.items():
            assert parallel.reports[rid] == rep

    def test_thread_cap_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("IKE_LAB_THREADS", "1")
        cfg = ExperimentConfig.from_dict(tiny_config(variants=["BASELINE", "IKE"]))
        outcome = run(cfg, out_dir=None, jobs=8)
        assert len(outcome.reports) == 2
        monkeypatch.setenv("IKE_LAB_THREADS", "junk")
        with pytest.raises(ConfigError):
            run(cfg, out_dir=None, jobs=8)

    def test_no_output_dir(self):
        cfg = ExperimentConfig.from_dict(tiny_config())
        outcome = run(cfg, out_dir=None)
        assert outcome.out_dir is None
        assert len(outcome.reports) == 1


class TestSelftest:
    def test_fresh_checkout_passes(self):
        report = selftest()
        assert report.passed
        table = report.format_table()
        assert "PASS" in table

    def test_fault_injection_fails_named_term(self):
        report = selftest(fault="kd")
        assert not report.passed
        failing = [row for row in report.rows if not row[-1]]
        assert failing
        assert any(detail == "kd" for _, detail, *_ in failing)
        passing_terms = {detail for suite, detail, *_, ok in report.rows if suite == "gradients" and ok}
        assert "id" in passing_terms

    def test_gradient_rows_within_tolerance(self):
        report = selftest()
        grad_rows = [r for r in report.rows if r[0] == "gradients"]
        assert {r[1] for r in grad_rows} == {"id", "id_hist", "kd", "mkd", "ikd"}
        assert all(r[2] <= 1e-6 for r in grad_rows)


class TestCli:
    def test_run_subcommand(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(tiny_config()))
        rc = cli.main(["run", "--config", str(cfg_path), "--out", str(tmp_path / "out")])
        assert rc == 0
        assert (tmp_path / "out" / "summary.csv").exists()
        assert "fmAP" in capsys.readouterr().out

    def test_run_seed_override(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(tiny_config(seeds=[0, 1, 2])))
        rc = cli.main(["run", "--config", str(cfg_path), "--out", str(tmp_path / "out"), "--seed", "7"])
        assert rc == 0
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert [r["seed"] for r in manifest["runs"]] == [7]

    def test_bad_config_exit_2(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(tiny_config(variants=["NOPE"])))
        rc = cli.main(["run", "--config", str(cfg_path)])
        assert rc == 2
        assert "config error" in capsys.readouterr().err

    def test_missing_config_exit_2(self, tmp_path):
        assert cli.main(["run", "--config", str(tmp_path / "none.json")]) == 2

    def test_sweep_subcommand(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(tiny_config()))
        rc = cli.main([
            "sweep", "--config", str(cfg_path), "--out", str(tmp_path / "out"),
            "--axis", "lambda=0,0.5,1.0",
        ])
        assert rc == 0
        summary = (tmp_path / "out" / "summary.csv").read_text().strip().splitlines()
        assert len(summary) == 4

    def test_sweep_bad_axis_exit_2(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(tiny_config()))
        assert cli.main(["sweep", "--config", str(cfg_path), "--axis", "gamma=1"]) == 2

    def test_orders_subcommand(self, tmp_path):
        doc = tiny_config()
        doc["dataset"]["synthetic"].update({"n_cameras": 6, "n_global": 24, "ids_per_camera": 6})
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(doc))
        rc = cli.main([
            "orders", "--config", str(cfg_path), "--out", str(tmp_path / "out"),
            "--preset", "T1,T2",
        ])
        assert rc == 0
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert {r["order"] for r in manifest["runs"]} == {"T1", "T2"}

    def test_selftest_subcommand(self, capsys):
        assert cli.main(["selftest"]) == 0
        assert "selftest: PASS" in capsys.readouterr().out
