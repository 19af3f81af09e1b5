"""Environment config, run-config schema and the reproducibility manifest"""
import csv
import json
import logging

import pytest
from pydantic import ValidationError

from playerchurn.config import Config
from playerchurn.logger import RunLogHandler, RunLogger, StatusFormatter, config_hash, sha256_file
from playerchurn.schemas import RunConfig


def test_config_hash_ignores_execution_settings():
    base = {"seed": 1, "gap_days": 180, "threads": 1, "output_dir": "a"}
    assert config_hash(base) == config_hash({**base, "threads": 8, "output_dir": "b"})
    assert config_hash(base) != config_hash({**base, "seed": 2})
    assert config_hash({"b": 1, "a": 2}) == config_hash({"a": 2, "b": 1})


def test_manifest_rows(tmp_path):
    run_log = RunLogger(tmp_path, "survival", {"seed": 3})
    run_log.set_seed("master", 3)
    run_log.set_seed("cv", 9)
    artifact = run_log.artifact("b.csv")
    artifact.write_text("x\n", encoding="utf-8")
    run_log.artifact("a/never_written.csv")
    manifest = run_log.save()

    with open(manifest, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["key", "value"]
    assert [r[0] for r in rows[1:]] == ["command", "config_sha256", "seed.cv", "seed.master", "sha256.b.csv"]
    assert rows[-1][1] == sha256_file(artifact)

    log = json.loads((tmp_path / "run_log.json").read_text(encoding="utf-8"))
    assert log["artifacts"] == ["b.csv"]
    assert log["seeds"] == {"master": 3, "cv": 9}


def test_run_log_records_stages_and_warnings(tmp_path):
    run_log = RunLogger(tmp_path / "nested" / "out", "ingest", {})
    run_log.log_stage("ingest", rows_read=10)
    run_log.log_warning("2 trace rows rejected")
    run_log.save()
    log = json.loads((tmp_path / "nested" / "out" / "run_log.json").read_text(encoding="utf-8"))
    assert log["stages"][0]["stage"] == "ingest"
    assert log["stages"][0]["rows_read"] == 10
    assert log["warnings"] == ["2 trace rows rejected"]


def test_status_formatter_matches_cli_prints():
    formatter = StatusFormatter()

    def record(level):
        return logging.LogRecord("playerchurn.cohorts", level, __file__, 1, "gap %dd", (60,), None)

    assert formatter.format(record(logging.INFO)) == "gap 60d"
    assert formatter.format(record(logging.WARNING)) == "⚠️  gap 60d"
    assert formatter.format(record(logging.ERROR)) == "❌ gap 60d"


def test_library_warnings_reach_the_run_log(tmp_path):
    run_log = RunLogger(tmp_path, "survival", {})
    library = logging.getLogger("playerchurn.cohorts")
    with RunLogHandler(run_log):
        library.info("not recorded")
        library.warning("gap 60: log-rank skipped")
    library.warning("after the run")
    assert run_log.log_data["warnings"] == ["gap 60: log-rank skipped"]


def test_environment_validation(monkeypatch):
    Config.validate()
    monkeypatch.setattr(Config, "THREADS", 0)
    with pytest.raises(ValueError, match="PLAYERCHURN_THREADS"):
        Config.validate()


def test_run_config_path_prefers_environment(monkeypatch, tmp_path):
    monkeypatch.setattr(Config, "RUN_CONFIG", "")
    assert Config.run_config_path() == Config.DEFAULT_RUN_CONFIG
    monkeypatch.setattr(Config, "RUN_CONFIG", str(tmp_path / "mine.json"))
    assert Config.run_config_path() == tmp_path / "mine.json"


def test_shipped_presets_load():
    data = json.loads(Config.DEFAULT_RUN_CONFIG.read_text(encoding="utf-8"))
    config = RunConfig.model_validate(data)
    assert config.gaps == [60, 90, 120, 180]
    assert config.preset("paper", "rf")["n_estimators"] == 300
    assert config.preset("paper", "knn") == {"n_neighbors": 24, "p": 1, "leaf_size": 2}
    assert config.window.days == 366
    assert config.synth is not None
    with pytest.raises(ValueError):
        config.preset("turbo", "rf")


def test_run_config_rejects_bad_values():
    with pytest.raises(ValidationError):
        RunConfig(gaps=[])
    with pytest.raises(ValidationError):
        RunConfig(threads=0)
    with pytest.raises(ValidationError):
        RunConfig(window={"start": "2008-02-01T00:00:00", "end": "2008-01-01T00:00:00"})
