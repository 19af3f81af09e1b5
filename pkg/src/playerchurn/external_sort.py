"""Canonical trace order, and the spill-to-disk merge sort used above the row threshold"""
import csv
import heapq
import logging
import tempfile
import threading
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import pandas as pd

from .schemas import CANONICAL_COLUMNS

logger = logging.getLogger(__name__)

# Canonical total order; the first row per (char_id, timestamp) in this order survives dedup
SORT_COLUMNS = ["timestamp", "char_id", "level", "race", "char_class", "zone", "guild_id"]
DEDUP_KEY = ["char_id", "timestamp"]

RUN_TIME_FORMAT = "%Y-%m-%d %H:%M:%S"
READ_CHUNK_ROWS = 250_000

# timestamp, char_id, level, race, char_class, zone, (guild missing, guild)
SortKey = Tuple[str, int, int, str, str, str, Tuple[int, int]]


def empty_trace_frame() -> pd.DataFrame:
    """Zero-row frame with the canonical column dtypes"""
    return pd.DataFrame({
        "char_id": pd.Series([], dtype="int64"),
        "level": pd.Series([], dtype="int64"),
        "race": pd.Series([], dtype="object"),
        "char_class": pd.Series([], dtype="object"),
        "zone": pd.Series([], dtype="object"),
        "guild_id": pd.Series([], dtype="Int64"),
        "timestamp": pd.Series([], dtype="datetime64[ns]"),
    })


def canonical_sort(frame: pd.DataFrame) -> pd.DataFrame:
    """Sort by the canonical total order and drop (char_id, timestamp) duplicates, first wins"""
    ordered = frame.sort_values(SORT_COLUMNS, kind="mergesort", na_position="last")
    deduped = ordered.drop_duplicates(subset=DEDUP_KEY, keep="first")
    return deduped.reset_index(drop=True)


def _row_key(row: List[str]) -> SortKey:
    char_id, level, race, char_class, zone, guild, stamp = row
    guild_key = (1, 0) if guild == "" else (0, int(guild))
    return (stamp, int(char_id), int(level), race, char_class, zone, guild_key)


def _write_run(frame: pd.DataFrame, path: Path):
    ordered = frame.sort_values(SORT_COLUMNS, kind="mergesort", na_position="last")
    ordered[list(CANONICAL_COLUMNS)].to_csv(
        path, header=False, index=False, na_rep="", date_format=RUN_TIME_FORMAT, lineterminator="\n",
    )


def _read_run(path: Path) -> Iterator[Tuple[SortKey, List[str]]]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        for row in csv.reader(f):
            yield _row_key(row), row


def _merge_runs(run_paths: Sequence[Path], out_path: Path) -> int:
    """k-way merge of sorted runs into out_path, dropping (char_id, timestamp) repeats"""
    written = 0
    last_identity = None
    with open(out_path, "w", encoding="utf-8", newline="") as out:
        writer = csv.writer(out, lineterminator="\n")
        streams = [_read_run(p) for p in run_paths]
        for key, row in heapq.merge(*streams, key=lambda item: item[0]):
            identity = (key[0], key[1])
            if identity == last_identity:
                continue
            last_identity = identity
            writer.writerow(row)
            written += 1
    return written


def _typed_chunk(raw: pd.DataFrame) -> pd.DataFrame:
    guild_text = raw["guild_id"]
    present = guild_text != ""
    return pd.DataFrame({
        "char_id": raw["char_id"].astype("int64"),
        "level": raw["level"].astype("int64"),
        "race": raw["race"].astype(object),
        "char_class": raw["char_class"].astype(object),
        "zone": raw["zone"].astype(object),
        "guild_id": guild_text.where(present, "0").astype("int64").astype("Int64").where(present),
        "timestamp": pd.to_datetime(raw["timestamp"], format=RUN_TIME_FORMAT),
    }).reset_index(drop=True)


class SpilledTrace:
    """Merged canonical trace kept in a temporary CSV; read back in chunks or whole"""

    def __init__(self, workspace: tempfile.TemporaryDirectory, path: Path, rows: int):
        self._workspace = workspace
        self.path = path
        self.rows = rows

    def iter_frames(self, chunk_rows: int = READ_CHUNK_ROWS) -> Iterator[pd.DataFrame]:
        if self.rows == 0:
            return
        reader = pd.read_csv(
            self.path, header=None, names=list(CANONICAL_COLUMNS), dtype=str,
            keep_default_na=False, chunksize=chunk_rows,
        )
        with reader:
            for raw in reader:
                yield _typed_chunk(raw)

    def load(self) -> pd.DataFrame:
        frames = list(self.iter_frames())
        return pd.concat(frames, ignore_index=True) if frames else empty_trace_frame()

    def close(self):
        self._workspace.cleanup()


class RunSpiller:
    """
    Collects validated trace chunks from any number of parser threads.

    With run_rows unset everything stays in memory and finish() returns the
    canonically sorted frame. Once more than run_rows rows are buffered, the
    buffer is written to disk as a sorted run, so resident rows stay under
    run_rows plus one chunk; finish() then k-way merges the runs into a
    SpilledTrace.
    """

    def __init__(self, run_rows: Optional[int] = None, workdir: Optional[Union[str, Path]] = None):
        if run_rows is not None and run_rows < 1:
            raise ValueError("run_rows must be >= 1")
        self.run_rows = run_rows
        self.workdir = workdir
        self.run_paths: List[Path] = []
        self.rows_spilled = 0
        self._lock = threading.Lock()
        self._pending: List[pd.DataFrame] = []
        self._pending_rows = 0
        self._workspace: Optional[tempfile.TemporaryDirectory] = None

    @property
    def spilled(self) -> bool:
        return bool(self.run_paths)

    @property
    def resident_rows(self) -> int:
        return self._pending_rows

    def add(self, frame: pd.DataFrame):
        if frame.empty:
            return
        with self._lock:
            self._pending.append(frame)
            self._pending_rows += len(frame)
            if self.run_rows is not None and self._pending_rows > self.run_rows:
                self._flush()

    def _flush(self):
        if not self._pending:
            return
        if self._workspace is None:
            self._workspace = tempfile.TemporaryDirectory(dir=self.workdir, prefix="playerchurn-sort-")
        path = Path(self._workspace.name) / f"run_{len(self.run_paths):05d}.csv"
        _write_run(pd.concat(self._pending, ignore_index=True), path)
        self.run_paths.append(path)
        self.rows_spilled += self._pending_rows
        self._pending, self._pending_rows = [], 0

    def finish(self) -> Union[pd.DataFrame, SpilledTrace]:
        with self._lock:
            if not self.run_paths:
                pending, self._pending, self._pending_rows = self._pending, [], 0
                if not pending:
                    return empty_trace_frame()
                return canonical_sort(pd.concat(pending, ignore_index=True))

            self._flush()
            merged_path = Path(self._workspace.name) / "merged.csv"
            rows = _merge_runs(self.run_paths, merged_path)
            logger.info(f"spilled {self.rows_spilled} rows into {len(self.run_paths)} sorted runs, "
                        f"{rows} after dedup")
            for path in self.run_paths:
                path.unlink()
            workspace, self._workspace, self.run_paths = self._workspace, None, []
            return SpilledTrace(workspace, merged_path, rows)

    def close(self):
        """Drop buffered rows and any runs already on disk"""
        with self._lock:
            self._pending, self._pending_rows = [], 0
            self.run_paths = []
            if self._workspace is not None:
                self._workspace.cleanup()
                self._workspace = None


def external_canonical_sort(frames: Sequence[pd.DataFrame], run_rows: int,
                            workdir: Optional[Union[str, Path]] = None) -> pd.DataFrame:
    """
    Same result as canonical_sort over the concatenated frames, computed by
    spilling sorted runs of about run_rows rows and k-way merging them.
    """
    spiller = RunSpiller(run_rows, workdir)
    for frame in frames:
        spiller.add(frame)
    merged = spiller.finish()
    if isinstance(merged, pd.DataFrame):
        return merged
    try:
        return merged.load()
    finally:
        merged.close()
