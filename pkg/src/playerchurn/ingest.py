"""Trace ingestion: parse, validate, merge, sort and deduplicate snapshot files"""
import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime
from io import StringIO
from pathlib import Path
from typing import Callable, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .errors import ParseError
from .external_sort import RunSpiller, SpilledTrace, empty_trace_frame
from .models import MAX_LEVEL, SLOT_MINUTES, IngestStats, SnapshotRecord
from .schemas import CANONICAL_COLUMNS, TraceSchema

logger = logging.getLogger(__name__)

CHUNK_LINES = 250_000
MAX_KEPT_REJECTS = 1000

# Largest magnitudes an int64 id can hold, as digit strings
INT64_MAX_DIGITS = "9223372036854775807"
INT64_MIN_DIGITS = "9223372036854775808"


@dataclass
class IngestResult:
    """
    Merged canonical trace plus counters and the first rejected rows.

    A spilled ingest keeps the merged trace on disk; `frame` loads it on first
    access and iter_frames() streams it in chunks.
    """
    stats: IngestStats
    rejects: List[ParseError] = field(default_factory=list)
    spilled: Optional[SpilledTrace] = None
    _frame: Optional[pd.DataFrame] = field(default=None, repr=False)

    @property
    def frame(self) -> pd.DataFrame:
        if self._frame is None:
            self._frame = self.spilled.load() if self.spilled is not None else empty_trace_frame()
        return self._frame

    def iter_frames(self) -> Iterator[pd.DataFrame]:
        if self._frame is None and self.spilled is not None:
            yield from self.spilled.iter_frames()
        else:
            yield self.frame

    def records(self) -> Iterator[SnapshotRecord]:
        for chunk in self.iter_frames():
            yield from iter_records(chunk)

    def close(self):
        """Remove the temporary merged file of a spilled ingest"""
        if self.spilled is not None:
            self.spilled.close()


@dataclass
class _FileParse:
    path: str
    rows_read: int
    rejects: List[ParseError]
    rejected: int


def _integral(values: pd.Series) -> Tuple[pd.Series, pd.Series, pd.Series]:
    """
    Parse a string column as int64.

    Returns (numbers, is-integer mask, fits-int64 mask); numbers is nullable
    Int64 and NA wherever the text is not an in-range integer.
    """
    stripped = values.str.strip()
    ok = stripped.str.fullmatch(r"[+-]?\d+").fillna(False).astype(bool)
    digits = stripped.str.lstrip("+-").str.lstrip("0").to_numpy(dtype=object)
    width = np.array([len(d) for d in digits], dtype=np.int64)
    limit = np.where(stripped.str.startswith("-").to_numpy(dtype=bool), INT64_MIN_DIGITS, INT64_MAX_DIGITS)
    within = (width < len(INT64_MAX_DIGITS)) | (
        (width == len(INT64_MAX_DIGITS)) & (digits <= limit.astype(object))
    )
    fits = ok & within
    numbers = stripped.where(fits, "0").astype("int64").astype("Int64").where(fits)
    return numbers, ok, fits


def _validate_frame(raw: pd.DataFrame, schema: TraceSchema) -> Tuple[pd.DataFrame, np.ndarray]:
    """
    Vectorised validation of raw string columns.

    Returns the typed frame (all rows, invalid ones carry junk) and an array of
    rejection reasons, '' for accepted rows. The first failing column in
    canonical order names the reason, so a row that is bad in several columns
    reports only the earliest: "x,81,..." is "char_id is not an integer", not
    a level out of range.
    """
    n = len(raw)
    reasons = np.full(n, "", dtype=object)

    def reject(mask: pd.Series, message: Union[str, pd.Series]):
        target = np.asarray(mask, dtype=bool) & (reasons == "")
        if isinstance(message, str):
            reasons[target] = message
        else:
            reasons[target] = np.asarray(message, dtype=object)[target]

    char_ids, char_ok, char_fits = _integral(raw["char_id"])
    reject(~char_ok, "char_id is not an integer")
    reject(~char_fits, "char_id out of range")

    levels, level_ok, _ = _integral(raw["level"])
    reject(~level_ok, "level is not an integer")
    in_range = levels.between(1, MAX_LEVEL).fillna(False).astype(bool)
    reject(level_ok & ~in_range, "level out of range 1..80: " + raw["level"].str.strip())

    races = raw["race"].str.strip()
    classes = raw["char_class"].str.strip()
    zones = raw["zone"].str.strip()
    reject(races == "", "empty race")
    reject(classes == "", "empty char_class")
    if schema.strict:
        reject(~races.isin(schema.races), "unknown race: " + races)
        reject(~classes.isin(schema.classes), "unknown char_class: " + classes)
    reject(zones == "", "empty zone")

    guild_text = raw["guild_id"].str.strip()
    guild_present = guild_text != ""
    guilds, guild_ok, guild_fits = _integral(guild_text)
    reject(guild_present & ~guild_ok, "guild_id is not an integer")
    reject(guild_present & ~guild_fits, "guild_id out of range")

    stamps = pd.to_datetime(raw["timestamp"].str.strip(), format=schema.timestamp_format, errors="coerce")
    reject(stamps.isna(), "malformed timestamp: " + raw["timestamp"])

    typed = pd.DataFrame({
        "char_id": char_ids.fillna(0).astype("int64"),
        "level": levels.fillna(1).astype("int64"),
        "race": races.astype(object),
        "char_class": classes.astype(object),
        "zone": zones.astype(object),
        "guild_id": guilds,
        # Snap sub-slot jitter down to the previous 10-minute boundary
        "timestamp": stamps.dt.floor(f"{SLOT_MINUTES}min"),
    })
    return typed, reasons


def _raw_frame(rows: List[List[str]], schema: TraceSchema) -> pd.DataFrame:
    frame = pd.DataFrame(rows, columns=schema.columns, dtype=object)
    return frame[list(CANONICAL_COLUMNS)].astype(str)


def _split_line(line: str, delimiter: str) -> List[str]:
    if '"' in line:
        return next(csv.reader([line], delimiter=delimiter))
    return line.split(delimiter)


def parse_snapshot_line(line: str, schema: Optional[TraceSchema] = None,
                        line_number: Optional[int] = None) -> SnapshotRecord:
    """Parse one delimited trace row into a validated SnapshotRecord; raises ParseError"""
    schema = schema or TraceSchema()
    fields = _split_line(line.rstrip("\r\n"), schema.delimiter)
    if len(fields) != len(CANONICAL_COLUMNS):
        raise ParseError(f"expected {len(CANONICAL_COLUMNS)} fields, got {len(fields)}", line_number)

    typed, reasons = _validate_frame(_raw_frame([fields], schema), schema)
    if reasons[0]:
        raise ParseError(reasons[0], line_number)
    return next(iter_records(typed))


def format_snapshot_line(record: SnapshotRecord, schema: Optional[TraceSchema] = None) -> str:
    """Render a record in the trace format (inverse of parse_snapshot_line)"""
    schema = schema or TraceSchema()
    values = {
        "char_id": str(record.char_id),
        "level": str(record.level),
        "race": record.race,
        "char_class": record.char_class,
        "zone": record.zone,
        "guild_id": "" if record.guild_id is None else str(record.guild_id),
        "timestamp": record.timestamp.strftime(schema.timestamp_format),
    }
    ordered = [values[c] for c in schema.columns]
    if any(schema.delimiter in v or '"' in v for v in ordered):
        buffer = StringIO()
        csv.writer(buffer, delimiter=schema.delimiter, lineterminator="").writerow(ordered)
        return buffer.getvalue()
    return schema.delimiter.join(ordered)


def iter_records(frame: pd.DataFrame) -> Iterator[SnapshotRecord]:
    """Yield SnapshotRecords from a canonical trace frame"""
    for row in frame[list(CANONICAL_COLUMNS)].itertuples(index=False):
        guild = row.guild_id
        yield SnapshotRecord(
            char_id=int(row.char_id),
            level=int(row.level),
            race=row.race,
            char_class=row.char_class,
            zone=row.zone,
            guild_id=None if pd.isna(guild) else int(guild),
            timestamp=pd.Timestamp(row.timestamp).to_pydatetime(),
        )


def _read_chunks(path: Path, schema: TraceSchema) -> Iterator[Tuple[List[List[str]], List[int], List[Tuple[int, str]]]]:
    """
    Yield (rows, line_numbers, bad[(line, reason)]) per chunk of the file.

    Lines are decoded one at a time, so an undecodable line is reported as bad
    and the rest of the file still parses.
    """
    width = len(CANONICAL_COLUMNS)
    rows: List[List[str]] = []
    numbers: List[int] = []
    bad: List[Tuple[int, str]] = []
    with open(path, "rb") as f:
        for line_number, raw_line in enumerate(f, start=1):
            if line_number == 1 and schema.header:
                continue
            try:
                line = raw_line.decode("utf-8").rstrip("\r\n")
            except UnicodeDecodeError as e:
                bad.append((line_number, f"invalid UTF-8 at byte {e.start}"))
                line = None
            if line is not None and line.strip():
                fields = _split_line(line, schema.delimiter)
                if len(fields) != width:
                    bad.append((line_number, f"expected {width} fields, got {len(fields)}"))
                else:
                    rows.append(fields)
                    numbers.append(line_number)
            if len(rows) + len(bad) >= CHUNK_LINES:
                yield rows, numbers, bad
                rows, numbers, bad = [], [], []
    if rows or bad:
        yield rows, numbers, bad


def _parse_file(path: str, schema: TraceSchema, sink: Callable[[pd.DataFrame], None]) -> _FileParse:
    """Parse and validate one trace file, handing accepted chunks to sink; strict mode aborts on the first bad row"""
    rejects: List[ParseError] = []
    rejected = 0
    rows_read = 0

    for rows, numbers, bad in _read_chunks(Path(path), schema):
        rows_read += len(rows) + len(bad)
        chunk_rejects = [ParseError(reason, line, path) for line, reason in bad]
        if rows:
            typed, reasons = _validate_frame(_raw_frame(rows, schema), schema)
            bad_mask = reasons != ""
            line_numbers = np.asarray(numbers)
            for idx in np.flatnonzero(bad_mask):
                chunk_rejects.append(ParseError(reasons[idx], int(line_numbers[idx]), path))
            sink(typed[~bad_mask])

        if chunk_rejects:
            chunk_rejects.sort(key=lambda e: e.line_number)
            if schema.strict:
                raise chunk_rejects[0]
            rejected += len(chunk_rejects)
            room = MAX_KEPT_REJECTS - len(rejects)
            if room > 0:
                rejects.extend(chunk_rejects[:room])

    if rejected:
        logger.warning(f"{path}: rejected {rejected} of {rows_read} rows (first: {rejects[0]})")
    return _FileParse(path=path, rows_read=rows_read, rejects=rejects, rejected=rejected)


def _check_readable(paths: Sequence[Union[str, Path]]):
    for p in paths:
        path = Path(p)
        if not path.is_file():
            raise FileNotFoundError(f"trace file not found or not a file: {path}")
        try:
            with open(path, "rb") as f:
                f.read(1)
        except OSError as e:
            raise OSError(f"cannot read trace file {path}: {e}") from e


def summarize(frames: Union[pd.DataFrame, Iterable[pd.DataFrame]], rows_read: int,
              rows_rejected: int) -> IngestStats:
    """Counters for a merged canonical trace, given whole or as a stream of chunks"""
    if isinstance(frames, pd.DataFrame):
        frames = [frames]
    accepted = 0
    uniques = {column: set() for column in ("char_id", "race", "char_class", "zone", "guild_id", "timestamp")}
    start = end = None
    for chunk in frames:
        if chunk.empty:
            continue
        accepted += len(chunk)
        for column, seen in uniques.items():
            seen.update(chunk[column].dropna().unique())
        first, last = chunk["timestamp"].min(), chunk["timestamp"].max()
        start = first if start is None else min(start, first)
        end = last if end is None else max(end, last)

    return IngestStats(
        rows_read=rows_read,
        rows_accepted=accepted,
        rows_rejected=rows_rejected,
        duplicates_dropped=rows_read - rows_rejected - accepted,
        unique_characters=len(uniques["char_id"]),
        unique_races=len(uniques["race"]),
        unique_classes=len(uniques["char_class"]),
        unique_zones=len(uniques["zone"]),
        unique_guilds=len(uniques["guild_id"]),
        unique_timestamps=len(uniques["timestamp"]),
        window_start=start.to_pydatetime() if start is not None else None,
        window_end=end.to_pydatetime() if end is not None else None,
    )


def ingest_traces(paths: Sequence[Union[str, Path]], schema: Optional[TraceSchema] = None,
                  threads: int = 1, spill_rows: Optional[int] = None,
                  spill_dir: Optional[Union[str, Path]] = None) -> IngestResult:
    """
    Load all trace files and merge them into one canonical stream.

    Files are parsed independently (concurrently when threads > 1) in chunks
    and the accepted rows are merged in argument-order-independent canonical
    order. Once more than spill_rows accepted rows are held, they go to disk as
    sorted runs and the merged trace stays on disk until read.
    """
    schema = schema or TraceSchema()
    if threads < 1:
        raise ValueError("threads must be >= 1")
    _check_readable(paths)
    str_paths = [str(p) for p in paths]

    spiller = RunSpiller(spill_rows, spill_dir)
    try:
        if threads == 1 or len(str_paths) <= 1:
            parsed = [_parse_file(p, schema, spiller.add) for p in str_paths]
        else:
            with ThreadPoolExecutor(max_workers=min(threads, len(str_paths))) as executor:
                futures = [executor.submit(_parse_file, p, schema, spiller.add) for p in str_paths]
                parsed = [future.result() for future in futures]
        merged = spiller.finish()
    except BaseException:
        spiller.close()
        raise

    rows_read = sum(p.rows_read for p in parsed)
    rows_rejected = sum(p.rejected for p in parsed)
    rejects: List[ParseError] = []
    for p in parsed:
        rejects.extend(p.rejects)
    rejects = rejects[:MAX_KEPT_REJECTS]

    if isinstance(merged, SpilledTrace):
        stats = summarize(merged.iter_frames(), rows_read, rows_rejected)
        result = IngestResult(stats=stats, rejects=rejects, spilled=merged)
    else:
        stats = summarize(merged, rows_read, rows_rejected)
        result = IngestResult(stats=stats, rejects=rejects, _frame=merged)
    logger.info(
        f"ingested {len(str_paths)} file(s): read={stats.rows_read} accepted={stats.rows_accepted} "
        f"rejected={stats.rows_rejected} duplicates={stats.duplicates_dropped}"
    )
    return result


def window_filter(records: Union[pd.DataFrame, Iterable[SnapshotRecord]],
                  start: datetime, end: datetime) -> Union[pd.DataFrame, Iterator[SnapshotRecord]]:
    """Keep records with start <= timestamp <= end (closed interval)"""
    if start > end:
        raise ValueError(f"window start {start} is after end {end}")
    if isinstance(records, pd.DataFrame):
        stamps = records["timestamp"]
        mask = (stamps >= pd.Timestamp(start)) & (stamps <= pd.Timestamp(end))
        return records[mask].reset_index(drop=True)
    return (r for r in records if start <= r.timestamp <= end)


def write_trace(frame: pd.DataFrame, path: Union[str, Path], schema: Optional[TraceSchema] = None) -> Path:
    """Write a canonical trace in the configured delimited format"""
    write_trace_chunks([frame], path, schema)
    return Path(path)


def write_trace_chunks(chunks: Iterable[pd.DataFrame], path: Union[str, Path],
                       schema: Optional[TraceSchema] = None) -> int:
    """Write a trace arriving as a stream of canonical frames; returns the row count"""
    schema = schema or TraceSchema()
    path = Path(path)
    path.parent.mkdir(exist_ok=True, parents=True)
    rows = 0
    header_pending = schema.header
    with open(path, "w", encoding="utf-8", newline="") as f:
        for chunk in chunks:
            chunk[list(schema.columns)].to_csv(
                f,
                sep=schema.delimiter,
                header=header_pending,
                index=False,
                na_rep="",
                date_format=schema.timestamp_format,
                lineterminator="\n",
            )
            header_pending = False
            rows += len(chunk)
        if header_pending:
            f.write(schema.delimiter.join(schema.columns) + "\n")
    return rows


def write_stats(stats: IngestStats, path: Union[str, Path]) -> Path:
    """IngestStats as name,value CSV"""
    path = Path(path)
    path.parent.mkdir(exist_ok=True, parents=True)
    pd.DataFrame(stats.to_rows(), columns=["name", "value"]).to_csv(path, index=False, lineterminator="\n")
    return path
