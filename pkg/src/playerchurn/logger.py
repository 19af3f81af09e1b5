"""Run log and manifest generation for playerchurn batch runs"""
import csv
import hashlib
import json
import logging
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional


def sha256_file(path: Path) -> str:
    """Hex sha256 of a file's bytes"""
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


# Execution-only settings; they never change results, so they stay out of the hash
HASH_EXCLUDE = ("threads", "output_dir", "log_level")


def config_hash(effective_config: Dict[str, Any]) -> str:
    """Stable hash of a config dict (sorted keys, no whitespace)"""
    hashed = {k: v for k, v in effective_config.items() if k not in HASH_EXCLUDE}
    canonical = json.dumps(hashed, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class RunLogger:
    """Collects what a run did and writes run_log.json plus the reproducibility manifest"""

    MANIFEST_NAME = "manifest.csv"
    RUN_LOG_NAME = "run_log.json"

    def __init__(self, output_dir: Path, command: str, effective_config: Dict[str, Any]):
        """
        Initialize the logger

        Args:
            output_dir: Directory every artifact of this run is written to
            command: Subcommand name (ingest, profile, ...)
            effective_config: Config after flag > file > env > default resolution
        """
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(exist_ok=True, parents=True)

        # Run ID from wall-clock time (YYYYMMDD_HHMMSS); never enters the manifest
        self.run_id = datetime.now().strftime("%Y%m%d_%H%M%S")
        self.command = command
        self.effective_config = effective_config
        self.artifacts: List[Path] = []
        self.seeds: Dict[str, int] = {}

        self.log_data: Dict[str, Any] = {
            "run_id": self.run_id,
            "timestamp": datetime.now().isoformat(),
            "command": command,
            "config": effective_config,
            "stages": [],
            "artifacts": [],
            "warnings": [],
        }

    def log_stage(self, name: str, **details: Any):
        """Record a completed pipeline stage with its summary numbers"""
        self.log_data["stages"].append({
            "stage": name,
            "timestamp": datetime.now().isoformat(),
            **details,
        })

    def log_warning(self, message: str):
        self.log_data["warnings"].append(message)

    def set_seed(self, name: str, value: int):
        self.seeds[name] = int(value)

    def artifact(self, name: str) -> Path:
        """Path for a new artifact inside the output directory; registered for checksums"""
        path = self.output_dir / name
        path.parent.mkdir(exist_ok=True, parents=True)
        if path not in self.artifacts:
            self.artifacts.append(path)
        return path

    def manifest_rows(self) -> List[List[str]]:
        rows = [
            ["command", self.command],
            ["config_sha256", config_hash(self.effective_config)],
        ]
        for name in sorted(self.seeds):
            rows.append([f"seed.{name}", str(self.seeds[name])])
        for path in sorted(self.artifacts, key=lambda p: p.relative_to(self.output_dir).as_posix()):
            if path.exists():
                rel = path.relative_to(self.output_dir).as_posix()
                rows.append([f"sha256.{rel}", sha256_file(path)])
        return rows

    def save(self) -> Optional[Path]:
        """Write manifest.csv (deterministic) and run_log.json (timestamped)"""
        manifest_path = self.output_dir / self.MANIFEST_NAME
        with open(manifest_path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["key", "value"])
            writer.writerows(self.manifest_rows())

        self.log_data["artifacts"] = [
            p.relative_to(self.output_dir).as_posix() for p in self.artifacts if p.exists()
        ]
        self.log_data["seeds"] = dict(self.seeds)
        log_path = self.output_dir / self.RUN_LOG_NAME
        with open(log_path, "w", encoding="utf-8") as f:
            json.dump(self.log_data, f, indent=2, default=str)
        return manifest_path


class StatusFormatter(logging.Formatter):
    """Library log records in the same register as the CLI's status prints"""

    PREFIXES = {logging.WARNING: "⚠️  ", logging.ERROR: "❌ ", logging.CRITICAL: "❌ "}

    def format(self, record: logging.LogRecord) -> str:
        return self.PREFIXES.get(record.levelno, "") + record.getMessage()


class RunLogHandler(logging.Handler):
    """Copies WARNING and above into run_log.json's warnings list"""

    def __init__(self, run_log: "RunLogger"):
        super().__init__(level=logging.WARNING)
        self.run_log = run_log

    def emit(self, record: logging.LogRecord):
        self.run_log.log_warning(record.getMessage())

    def __enter__(self) -> "RunLogHandler":
        logging.getLogger("playerchurn").addHandler(self)
        return self

    def __exit__(self, *exc):
        logging.getLogger("playerchurn").removeHandler(self)
