"""Configuration for playerchurn - loads .env from multiple locations"""
import os
from pathlib import Path
from dotenv import load_dotenv

# Get project root (parent of src/)
PROJECT_ROOT = Path(__file__).resolve().parent.parent.parent
PACKAGE_DIR = Path(__file__).resolve().parent

# Later files never override values already set (override=False),
# so the process environment always wins
env_files = [
    PROJECT_ROOT / ".env",
]

for env_file in env_files:
    if env_file.exists():
        load_dotenv(env_file, override=False)

# Also try loading from current working directory
load_dotenv(override=False)


class Config:
    """Environment-level defaults; the run-config file and CLI flags override these"""

    # Run config file (JSON). Shipped presets live in config/paper.json
    RUN_CONFIG: str = os.getenv("PLAYERCHURN_CONFIG", "")
    DEFAULT_RUN_CONFIG: Path = PROJECT_ROOT / "config" / "paper.json"

    OUTPUT_DIR: str = os.getenv("PLAYERCHURN_OUTPUT_DIR", "out")
    THREADS: int = int(os.getenv("PLAYERCHURN_THREADS", "1"))

    # Row count above which the final trace sort spills sorted runs to disk
    SPILL_ROWS: int = int(os.getenv("PLAYERCHURN_SPILL_ROWS", "2000000"))

    LOG_LEVEL: str = os.getenv("PLAYERCHURN_LOG_LEVEL", "INFO")

    @classmethod
    def validate(cls) -> None:
        """Validate environment values that have no safe fallback"""
        if cls.THREADS < 1:
            raise ValueError(f"PLAYERCHURN_THREADS must be >= 1, got {cls.THREADS}")
        if cls.SPILL_ROWS < 1:
            raise ValueError(f"PLAYERCHURN_SPILL_ROWS must be >= 1, got {cls.SPILL_ROWS}")

    @classmethod
    def run_config_path(cls) -> Path:
        """Run config named by the environment, else the shipped tuned presets"""
        if cls.RUN_CONFIG:
            return Path(cls.RUN_CONFIG)
        return cls.DEFAULT_RUN_CONFIG


# Create global config instance
config = Config()
