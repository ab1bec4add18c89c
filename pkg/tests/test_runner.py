import csv
import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from dpmi import cli, runner


def small_config(**over):
    d = {
        "name": "unit",
        "dataset": {"generator": "unbalanced_carts",
                    "params": {"n_classes": 4, "n": 240, "width": 40, "gamma": 0.5,
                               "pattern_strength": 0.7}},
        "model": {"hidden": [24]},
        "training": {"optimizer": "adam", "learning_rate": 0.002, "batch_size": 30,
                     "epochs": 60, "early_stop": False},
        "privacy": {"mode": "none"},
        "attacks": ["bb"],
        "split": {"n": 60},
        "shadows": 3,
        "attack_training": {"epochs": 80},
        "repeats": 2,
        "seed": 5,
    }
    d.update(over)
    return d


class TestConfigValidation:
    def test_missing_name(self):
        d = small_config()
        del d["name"]
        with pytest.raises(runner.ConfigError, match="name"):
            runner.parse_config(d)

    def test_missing_split(self):
        d = small_config()
        del d["split"]
        with pytest.raises(runner.ConfigError, match="split.n"):
            runner.parse_config(d)

    def test_unknown_generator(self):
        d = small_config(dataset={"generator": "nope"})
        with pytest.raises(runner.ConfigError, match="nope"):
            runner.parse_config(d)

    def test_missing_csv_file(self):
        d = small_config(dataset={"csv": "/does/not/exist.csv"})
        with pytest.raises(runner.ConfigError, match="not found"):
            runner.parse_config(d)

    def test_bad_privacy_mode(self):
        d = small_config(privacy={"mode": "both"})
        with pytest.raises(runner.ConfigError):
            runner.parse_config(d)

    def test_cdp_needs_clip_with_noise(self):
        d = small_config(privacy={"mode": "cdp", "z": 2.0, "clip": None})
        with pytest.raises(runner.ConfigError, match="clipping"):
            runner.parse_config(d)

    def test_sweep_on_both_axes_rejected(self):
        d = small_config(sweep={"eps_i": [0.1], "z": [2.0]})
        with pytest.raises(runner.ConfigError, match="exactly one"):
            runner.parse_config(d)

    def test_unknown_attack_kind(self):
        d = small_config(attacks=["bb", "gray"])
        with pytest.raises(runner.ConfigError, match="gray"):
            runner.parse_config(d)


class TestRunJob:
    def test_overfit_toy_attack_beats_chance(self):
        cfg = runner.parse_config(small_config())
        res = runner.run_job(cfg, 0)
        assert res.rows[0]["auc"] > 0.55
        assert res.rows[0]["train_acc"] == 1.0

    def test_extreme_ldp_attack_at_chance(self):
        cfg = runner.parse_config(small_config(
            privacy={"mode": "ldp", "eps_i": 0.01}, repeats=3))
        aucs = [runner.run_job(cfg, r).rows[0]["auc"] for r in range(3)]
        assert np.mean(aucs) == pytest.approx(0.5, abs=0.05)

    def test_identical_repeat_is_identical(self):
        cfg = runner.parse_config(small_config())
        a = runner.run_job(cfg, 1)
        b = runner.run_job(cfg, 1)
        for ra, rb in zip(a.rows, b.rows):
            for key in runner.RESULT_COLUMNS:
                if key != "wall_clock_s":
                    assert ra[key] == rb[key], key

    def test_mode_exclusivity_digests(self):
        # cdp jobs never perturb inputs; features always from raw records
        cfg = runner.parse_config(small_config(
            privacy={"mode": "cdp", "z": 1.0, "clip": 4.0, "lot_size": 30}))
        prepared = runner.build_dataset(cfg)
        res = runner.run_job(cfg, 0, prepared)
        dataset, boundary = prepared
        layout = runner._partition(cfg, dataset, boundary,
                                   runner._stream_seed(cfg.seed, 0, runner._S_SPLIT))
        expect = runner._multi_digest([dataset.subset(layout.target_train),
                                       dataset.subset(layout.target_test)])
        assert res.digests["bb"]["eval_inputs"] == expect

    def test_wb_eval_sizes(self):
        cfg = runner.parse_config(small_config(attacks=["wb"], shadows=0))
        res = runner.run_job(cfg, 0)
        fs = res.feature_sets["wb"]
        # unknown halves only: n records, balanced
        assert len(fs) == 60
        assert (fs.flags == 1).sum() == 30


@pytest.fixture(scope="module")
def sweep_result():
    cfg = runner.parse_config(small_config(
        sweep={"z": [1.0, 16.0]},
        privacy={"mode": "cdp", "z": 1.0, "clip": 4.0, "lot_size": 30}))
    return runner.sweep(cfg)


class TestSweep:

    def test_reference_plus_grid_points(self, sweep_result):
        assert [p.label for p in sweep_result.points] == [
            "reference", "z=1", "z=16"]
        for p in sweep_result.points:
            assert len(p.results) == 2  # repeats

    def test_accuracy_non_increasing_in_z(self, sweep_result):
        accs = [np.mean([row["test_acc"] for res in p.results for row in res.rows])
                for p in sweep_result.points]
        assert accs[1] <= accs[0] + 0.03
        assert accs[2] <= accs[1] + 0.03

    def test_phi_in_range_or_na(self, sweep_result):
        for t in sweep_result.tradeoffs:
            assert t["phi"] is None or 0.0 <= t["phi"] <= 2.0
        for p in sweep_result.points[1:]:
            for res in p.results:
                for row in res.rows:
                    assert row["phi"] is None or 0.0 <= row["phi"] <= 2.0

    def test_single_point_grid_matches_run_job(self):
        cfg = runner.parse_config(small_config(sweep={"eps_i": [0.5]},
                                               privacy={"mode": "ldp", "eps_i": 0.5}))
        sw = runner.sweep(cfg)
        assert len(sw.points) == 2
        from dataclasses import replace
        solo = runner.run_job(replace(cfg, privacy=sw.points[1].privacy), 0)
        grid_row = sw.points[1].results[0].rows[0]
        for key in ("auc", "test_acc", "eps"):
            assert grid_row[key] == solo.rows[0][key]

    def test_no_grid_rejected(self):
        cfg = runner.parse_config(small_config())
        with pytest.raises(runner.ConfigError):
            runner.sweep(cfg)


class TestPersist:
    @pytest.fixture()
    def result(self):
        cfg = runner.parse_config(small_config(
            repeats=2, sweep={"eps_i": [0.5]},
            privacy={"mode": "ldp", "eps_i": 0.5}))
        return runner.sweep(cfg)

    def test_round_trip_12_significant_digits(self, tmp_path, result):
        runner.persist_results(tmp_path, result)
        with (tmp_path / "results.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        originals = [row for p in result.points for res in p.results
                     for row in res.rows]
        assert len(rows) == len(originals)
        for got, want in zip(rows, originals):
            for key in ("train_acc", "test_acc", "auc"):
                assert float(got[key]) == pytest.approx(want[key], rel=1e-11)

    def test_duplicate_id_refused_without_force(self, tmp_path, result):
        runner.persist_results(tmp_path, result)
        with pytest.raises(runner.PersistError, match="--force"):
            runner.persist_results(tmp_path, result)
        runner.persist_results(tmp_path, result, force=True)  # replaces cleanly
        with (tmp_path / "results.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 4  # (reference + 1 grid point) x 2 repeats x 1 attack

    def test_append_distinct_id(self, tmp_path, result):
        runner.persist_results(tmp_path, result)
        from dataclasses import replace
        other = runner.SweepResult(replace(result.config, name="other"),
                                   result.points, result.tradeoffs)
        for p in other.points:
            for res in p.results:
                for row in res.rows:
                    row["experiment_id"] = "other"
        runner.persist_results(tmp_path, other)
        with (tmp_path / "results.csv").open() as fh:
            ids = {r["experiment_id"] for r in csv.DictReader(fh)}
        assert ids == {"unit", "other"}

    def test_roc_file_row_counts(self, tmp_path, result):
        runner.persist_results(tmp_path, result)
        roc_files = sorted((tmp_path / "roc" / "unit").glob("roc_bb_*.csv"))
        assert len(roc_files) == 2  # reference + grid point
        grid_rows = 0
        for path in roc_files:
            with path.open() as fh:
                rows = list(csv.DictReader(fh))
            per_repeat = [r for r in rows if r["repeat"] != "mean"]
            mean_rows = [r for r in rows if r["repeat"] == "mean"]
            assert len(mean_rows) == 101
            if "inf" not in path.name:
                grid_rows += len(per_repeat)
        assert grid_rows == 1 * 2 * 101  # grid points x repeats x grid rows

    def test_config_snapshot_written(self, tmp_path, result):
        runner.persist_results(tmp_path, result)
        snap = json.loads((tmp_path / "config.json").read_text())
        assert snap["name"] == "unit"

    def test_feature_dumps_schema(self, tmp_path, result):
        runner.persist_results(tmp_path, result)
        dumps = sorted((tmp_path / "features" / "unit").glob("features_bb_*.csv"))
        assert dumps
        with dumps[0].open() as fh:
            header = next(csv.reader(fh))
        assert header[:3] == ["record_id", "class", "flag"]
        assert header[3] == "f0"


class TestReport:
    def test_zero_stddev_for_identical_repeats(self, tmp_path):
        rows = [["exp", "d", "4", "none", "n/a", "inf", "n/a", "n/a", str(r), "5",
                 "bb", "0.9", "0.8", "0.7", "n/a", "1.0"] for r in range(5)]
        self._write(tmp_path, rows)
        text = runner.report_summary(tmp_path)
        assert "0.8000±0.0000" in text
        assert "0.7000±0.0000" in text

    def test_empty_results(self, tmp_path):
        self._write(tmp_path, [])
        assert runner.report_summary(tmp_path) == "no data"

    def test_missing_dir(self, tmp_path):
        assert runner.report_summary(tmp_path / "nope") == "no data"

    def test_three_row_fixture_means(self, tmp_path):
        accs = [0.5, 0.6, 0.7]
        rows = [["exp", "d", "4", "ldp", "0.5", "20", "n/a", "n/a", str(r), "5",
                 "bb", "1.0", str(a), str(a), "n/a", "1.0"]
                for r, a in enumerate(accs)]
        self._write(tmp_path, rows)
        text = runner.report_summary(tmp_path)
        mean, std = np.mean(accs), np.std(accs, ddof=1)
        assert f"{mean:.4f}±{std:.4f}" in text

    def test_ineffective_attack_flagged(self, tmp_path):
        rows = [
            ["exp", "d", "4", "none", "n/a", "inf", "n/a", "n/a", "0", "5",
             "bb", "0.9", "0.8", "0.45", "n/a", "1.0"],
            ["exp", "d", "4", "ldp", "0.5", "20", "n/a", "n/a", "0", "5",
             "bb", "0.9", "0.7", "0.44", "1.2", "1.0"],
        ]
        self._write(tmp_path, rows)
        text = runner.report_summary(tmp_path)
        assert "attack ineffective" in text

    @staticmethod
    def _write(path: Path, rows):
        with (path / "results.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(runner.RESULT_COLUMNS)
            writer.writerows(rows)


class TestCli:
    def test_account_prints_epsilon(self, capsys):
        rc = cli.main(["account", "--n", "8000", "--lot", "128",
                       "--epochs", "200", "--z", "0.5"])
        assert rc == 0
        out = capsys.readouterr().out.strip()
        assert float(out) == pytest.approx(88.1, rel=0.3)

    def test_bad_config_exits_2(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{}")
        rc = cli.main(["run", "--config", str(path), "--out", str(tmp_path)])
        assert rc == 2

    def test_missing_out_exits_2(self, tmp_path, monkeypatch, capsys):
        monkeypatch.delenv("DPMI_OUT", raising=False)
        path = tmp_path / "c.json"
        path.write_text(json.dumps(small_config()))
        rc = cli.main(["run", "--config", str(path)])
        assert rc == 2

    def test_gen_and_report_round_trip(self, tmp_path, capsys):
        out_csv = tmp_path / "carts.csv"
        rc = cli.main(["gen", "--kind", "unbalanced_carts", "--out", str(out_csv),
                       "--classes", "4", "--records", "50", "--width", "20"])
        assert rc == 0 and out_csv.exists()
        from dpmi import datasets
        assert len(datasets.load_csv_dataset(out_csv)) == 50

    def test_run_writes_results(self, tmp_path, capsys):
        cfg = small_config(repeats=1)
        cfg["training"]["epochs"] = 10
        cfg["attack_training"] = {"epochs": 15}
        cfg["shadows"] = 1
        path = tmp_path / "c.json"
        path.write_text(json.dumps(cfg))
        rc = cli.main(["run", "--config", str(path), "--out", str(tmp_path / "o")])
        assert rc == 0
        assert (tmp_path / "o" / "results.csv").exists()

    def test_env_var_out_dir(self, tmp_path, monkeypatch, capsys):
        cfg = small_config(repeats=1)
        cfg["training"]["epochs"] = 5
        cfg["attack_training"] = {"epochs": 10}
        cfg["shadows"] = 1
        path = tmp_path / "c.json"
        path.write_text(json.dumps(cfg))
        monkeypatch.setenv("DPMI_OUT", str(tmp_path / "envout"))
        rc = cli.main(["run", "--config", str(path)])
        assert rc == 0
        assert (tmp_path / "envout" / "results.csv").exists()
