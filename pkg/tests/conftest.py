"""Shared fixtures: trace files, snapshot frames and small synthetic corpora"""
from datetime import datetime
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import pytest

from playerchurn.schemas import SynthConfig, SynthGroupSpec, TraceSchema, WindowSpec

# (char_id, level, race, char_class, zone, guild_id, "YYYY-mm-dd HH:MM:SS")
Row = Tuple[int, int, str, str, str, Optional[int], str]


def trace_line(row: Row) -> str:
    char_id, level, race, char_class, zone, guild, stamp = row
    return f"{char_id},{level},{race},{char_class},{zone},{'' if guild is None else guild},{stamp}"


@pytest.fixture
def schema() -> TraceSchema:
    return TraceSchema()


@pytest.fixture
def write_lines(tmp_path):
    """Write raw lines to a file under tmp_path and return its path"""
    def write(name: str, lines: Sequence[str]):
        path = tmp_path / name
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path
    return write


@pytest.fixture
def write_rows(write_lines):
    """Write snapshot tuples as a trace file"""
    def write(name: str, rows: Sequence[Row]):
        return write_lines(name, [trace_line(r) for r in rows])
    return write


@pytest.fixture
def make_frame():
    """Canonical-dtype snapshot frame from tuples"""
    def build(rows: List[Row]) -> pd.DataFrame:
        return pd.DataFrame({
            "char_id": pd.Series([r[0] for r in rows], dtype="int64"),
            "level": pd.Series([r[1] for r in rows], dtype="int64"),
            "race": pd.Series([r[2] for r in rows], dtype=object),
            "char_class": pd.Series([r[3] for r in rows], dtype=object),
            "zone": pd.Series([r[4] for r in rows], dtype=object),
            "guild_id": pd.array([r[5] for r in rows], dtype="Int64"),
            "timestamp": pd.to_datetime(pd.Series([r[6] for r in rows]), format="%Y-%m-%d %H:%M:%S"),
        })
    return build


@pytest.fixture
def window_2008() -> WindowSpec:
    return WindowSpec(start=datetime(2008, 1, 1), end=datetime(2008, 12, 31, 23, 50))


@pytest.fixture
def two_group_synth() -> SynthConfig:
    """Long-lived guilded players against short-lived casual ones"""
    return SynthConfig(
        players=400,
        window_days=366,
        seed=11,
        groups=[
            SynthGroupSpec(name="long", fraction=0.5, mean_lifetime_days=200.0,
                           activity_probability=0.6, mean_snapshots_per_day=8.0, guild_probability=0.8),
            SynthGroupSpec(name="short", fraction=0.5, mean_lifetime_days=150.0,
                           activity_probability=0.3, mean_snapshots_per_day=3.0, guild_probability=0.2),
        ],
    )


@pytest.fixture
def separable_data():
    """Two Gaussian clouds six standard deviations apart in 6 dimensions"""
    rng = np.random.default_rng(5)
    n = 400
    y = np.r_[np.zeros(n // 2, dtype=np.int64), np.ones(n // 2, dtype=np.int64)]
    X = rng.normal(size=(n, 6))
    X[y == 1] += 3.0
    X[y == 0] -= 3.0
    order = rng.permutation(n)
    return X[order], y[order]
