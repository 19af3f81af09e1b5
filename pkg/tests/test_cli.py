"""End-to-end subcommand runs through the CLI entry point"""
import json

import pandas as pd
import pytest

from playerchurn.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, derive_seeds, run
from playerchurn.learners import load_model

RUN_CONFIG = {
    "seed": 7,
    "gaps": [60, 180],
    "cv_folds": 3,
    "presets": {"quick": {"rf": {"n_estimators": 10}, "knn": {"n_neighbors": 5}}},
    "synth": {
        "players": 300,
        "window_days": 366,
        "groups": [
            {"name": "long", "fraction": 0.5, "mean_lifetime_days": 200.0, "activity_probability": 0.6,
             "mean_snapshots_per_day": 6.0, "guild_probability": 0.8},
            {"name": "short", "fraction": 0.5, "mean_lifetime_days": 120.0, "activity_probability": 0.3,
             "mean_snapshots_per_day": 3.0, "guild_probability": 0.2},
        ],
    },
}


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(RUN_CONFIG), encoding="utf-8")
    return str(path)


@pytest.fixture
def trace(tmp_path, config_file):
    out = tmp_path / "synth"
    assert run(["synth", "--config", config_file, "--output-dir", str(out)]) == EXIT_OK
    assert (out / "ground_truth.csv").exists()
    return str(out / "trace.csv")


def test_synth_is_reproducible(tmp_path, config_file, trace):
    again = tmp_path / "again"
    assert run(["synth", "--config", config_file, "--output-dir", str(again)]) == EXIT_OK
    assert (again / "trace.csv").read_bytes() == open(trace, "rb").read()
    assert (again / "manifest.csv").read_text() == (tmp_path / "synth" / "manifest.csv").read_text()


def test_ingest_writes_stats(tmp_path, config_file, trace):
    out = tmp_path / "ingest"
    assert run(["ingest", trace, "--config", config_file, "--output-dir", str(out)]) == EXIT_OK
    stats = pd.read_csv(out / "ingest_stats.csv")
    assert len(stats) > 0
    assert (out / "trace.csv").read_bytes() == open(trace, "rb").read()
    assert len(pd.read_csv(out / "rejects.csv")) == 0


def test_spilled_ingest_writes_the_same_trace(tmp_path, trace):
    config = tmp_path / "spill.json"
    config.write_text(json.dumps({**RUN_CONFIG, "spill_rows": 500}), encoding="utf-8")
    out = tmp_path / "spilled"
    assert run(["ingest", trace, "--config", str(config), "--output-dir", str(out)]) == EXIT_OK
    assert (out / "trace.csv").read_bytes() == open(trace, "rb").read()


def test_out_of_range_guild_is_one_reject(tmp_path, config_file):
    path = tmp_path / "trace.csv"
    path.write_text(
        "1,10,Orc,Warrior,Durotar,5,2008-01-01 00:10:00\n"
        "2,70,Orc,Mage,Durotar,18446744073709551617,2008-01-01 00:10:00\n",
        encoding="utf-8",
    )
    out = tmp_path / "ingest"
    assert run(["ingest", str(path), "--config", config_file, "--output-dir", str(out)]) == EXIT_OK
    stats = dict(pd.read_csv(out / "ingest_stats.csv", dtype=str, keep_default_na=False).values)
    assert stats["rows_accepted"] == "1"
    assert stats["rows_rejected"] == "1"
    assert pd.read_csv(out / "rejects.csv")["reason"].tolist() == ["guild_id out of range"]
    warnings = json.loads((out / "run_log.json").read_text(encoding="utf-8"))["warnings"]
    assert any("rejected 1 of 2 rows" in w for w in warnings)
    assert "1 trace rows rejected" in warnings


def test_survival_writes_one_curve_per_gap(tmp_path, config_file, trace):
    out = tmp_path / "survival"
    code = run(["survival", trace, "--config", config_file, "--output-dir", str(out),
                "--gaps", "60,90,120,180"])
    assert code == EXIT_OK
    for gap in (60, 90, 120, 180):
        curve = pd.read_csv(out / f"km_gap{gap}.csv")
        assert curve["survival"].iloc[0] == 1.0
    assert (out / "km_overlay.svg").exists()
    summary = pd.read_csv(out / "survival_summary.csv")
    assert summary["gap_days"].tolist() == [60, 90, 120, 180]
    assert "survival_at_215" in summary.columns
    cohorts = pd.read_csv(out / "cohorts_gap180.csv")
    assert "guild" in set(cohorts["comparison"])
    manifest = pd.read_csv(out / "manifest.csv")
    assert "sha256.km_gap60.csv" in set(manifest["key"])


def test_manifest_ignores_thread_count(tmp_path, config_file, trace):
    manifests = []
    for threads in ("1", "2"):
        out = tmp_path / f"threads{threads}"
        assert run(["survival", trace, "--config", config_file, "--output-dir", str(out),
                    "--threads", threads]) == EXIT_OK
        manifests.append((out / "manifest.csv").read_text(encoding="utf-8"))
    assert manifests[0] == manifests[1]


def test_train_writes_model_and_metrics(tmp_path, config_file, trace):
    out = tmp_path / "train"
    code = run(["train", trace, "--config", config_file, "--output-dir", str(out),
                "--model", "rf", "--preset", "quick"])
    assert code == EXIT_OK
    bundle = load_model(out / "model_rf.txt")
    assert bundle.kind == "rf"
    assert bundle.estimator.n_estimators == 10
    metrics = pd.read_csv(out / "metrics_rf.csv")
    assert list(metrics.columns) == ["model", "params", "fold", "metric", "value"]
    assert set(metrics["fold"].astype(str)) == {"0", "1", "2", "mean", "test"}
    assert (out / "roc_rf.csv").exists()
    manifest = pd.read_csv(out / "manifest.csv").set_index("key")["value"]
    assert int(manifest["seed.split"]) == derive_seeds(7)["split"]


def test_train_from_profiled_dataset(tmp_path, config_file, trace):
    profiled = tmp_path / "profile"
    assert run(["profile", trace, "--config", config_file, "--output-dir", str(profiled)]) == EXIT_OK
    out = tmp_path / "knn"
    code = run(["train", "--dataset", str(profiled / "dataset.csv"), "--config", config_file,
                "--output-dir", str(out), "--model", "knn", "--grid", '{"n_neighbors": [3, 5]}'])
    assert code == EXIT_OK
    metrics = pd.read_csv(out / "metrics_knn.csv")
    assert len(metrics[metrics["fold"] == "mean"]) == 2


def test_report_writes_tables(tmp_path, config_file, trace):
    out = tmp_path / "report"
    assert run(["report", trace, "--config", config_file, "--output-dir", str(out),
                "--group-by", "guild"]) == EXIT_OK
    for name in ("freq_race.csv", "freq_zone.csv", "activity_month.csv", "activity_day_by_guild.csv",
                 "playtime_percentiles.csv", "activity_day.svg"):
        assert (out / name).exists(), name


def test_derived_seeds_are_stable_and_distinct():
    seeds = derive_seeds(2008)
    assert seeds == derive_seeds(2008)
    assert len(set(seeds.values())) == 4
    assert seeds != derive_seeds(2009)


def test_help_exits_cleanly():
    assert run(["--help"]) == EXIT_OK


def test_unknown_flag_is_a_usage_error(config_file):
    assert run(["survival", "--config", config_file, "--bogus"]) == EXIT_USAGE
    assert run(["teleport"]) == EXIT_USAGE


def test_missing_inputs_is_a_usage_error(tmp_path, config_file):
    assert run(["survival", "--config", config_file, "--output-dir", str(tmp_path / "o")]) == EXIT_USAGE


def test_unknown_preset_is_a_usage_error(tmp_path, config_file, trace):
    code = run(["train", trace, "--config", config_file, "--output-dir", str(tmp_path / "o"),
                "--preset", "turbo"])
    assert code == EXIT_USAGE


def test_missing_trace_is_a_data_error(tmp_path, config_file):
    code = run(["ingest", str(tmp_path / "nope.csv"), "--config", config_file,
                "--output-dir", str(tmp_path / "o")])
    assert code == EXIT_DATA


def test_bad_config_is_a_usage_error(tmp_path):
    invalid = tmp_path / "invalid.json"
    invalid.write_text(json.dumps({"gap_days": -1}), encoding="utf-8")
    broken = tmp_path / "broken.json"
    broken.write_text("{not json", encoding="utf-8")
    for path in (invalid, broken, tmp_path / "absent.json"):
        assert run(["profile", "x.csv", "--config", str(path), "--output-dir", str(tmp_path / "o")]) == EXIT_USAGE


@pytest.mark.slow
def test_evaluate_compares_classifiers(tmp_path, config_file, trace):
    out = tmp_path / "evaluate"
    code = run(["evaluate", trace, "--config", config_file, "--output-dir", str(out), "--preset", "quick"])
    assert code == EXIT_OK
    evaluation = pd.read_csv(out / "evaluation.csv")
    assert evaluation["model"].tolist() == ["lr", "svm", "knn", "rf"]
    assert evaluation["test_roc_auc"].between(0.0, 1.0).all()
    clustering = pd.read_csv(out / "clustering.csv")
    assert len(clustering) == 3
    assert 'id="series-1"' in (out / "clusters_pca2.svg").read_text(encoding="utf-8")
    assert 'id="panel-2-series-1"' in (out / "clusters_pca3.svg").read_text(encoding="utf-8")
    selection = pd.read_csv(out / "feature_selection.csv")
    assert (selection["rfe_round"] == 0).sum() == len(selection) // 2
