"""Trace parsing, merging, deduplication and windowing"""
from datetime import datetime

import pandas as pd
import pytest

from playerchurn.errors import ParseError
from playerchurn.external_sort import RunSpiller, SpilledTrace, canonical_sort, external_canonical_sort
from playerchurn.ingest import (
    format_snapshot_line, ingest_traces, iter_records, parse_snapshot_line,
    window_filter, write_trace,
)
from playerchurn.schemas import TraceSchema
from playerchurn.synth import generate_traces

GOOD = [
    (1, 10, "Orc", "Warrior", "Durotar", 5, "2008-01-01 00:10:00"),
    (1, 11, "Orc", "Warrior", "Durotar", 5, "2008-01-01 00:20:00"),
    (3, 5, "Troll", "Priest", "Durotar", None, "2008-01-02 00:00:00"),
]


def _line(row) -> str:
    return ",".join("" if v is None else str(v) for v in row)


def test_parse_line_example():
    line = "7,80,Orc,Warrior,Orgrimmar,6,2008-12-03 12:20:00"
    record = parse_snapshot_line(line)
    assert record.char_id == 7
    assert record.level == 80
    assert record.guild_id == 6
    assert record.timestamp == datetime(2008, 12, 3, 12, 20)
    assert format_snapshot_line(record) == line


def test_parse_line_empty_guild():
    record = parse_snapshot_line("7,80,Orc,Warrior,Orgrimmar,,2008-12-03 12:20:00")
    assert record.guild_id is None


def test_parse_line_snaps_jitter_to_slot():
    record = parse_snapshot_line("7,80,Orc,Warrior,Orgrimmar,,2008-12-03 12:27:41")
    assert record.timestamp == datetime(2008, 12, 3, 12, 20)


@pytest.mark.parametrize("line, reason", [
    ("7,81,Orc,Warrior,Orgrimmar,6,2008-12-03 12:20:00", "level out of range"),
    ("x,80,Orc,Warrior,Orgrimmar,6,2008-12-03 12:20:00", "char_id is not an integer"),
    ("x,81,Orc,Warrior,Orgrimmar,6,2008-12-03 12:20:00", "char_id is not an integer"),
    ("7,80,Orc,Warrior,Orgrimmar,6,not-a-time", "malformed timestamp"),
    ("7,80,Orc,Warrior,Orgrimmar,6", "expected 7 fields"),
    ("7,80,Orc,Warrior,,6,2008-12-03 12:20:00", "empty zone"),
    ("99999999999999999999,80,Orc,Warrior,Orgrimmar,6,2008-12-03 12:20:00", "char_id out of range"),
    ("7,80,Orc,Warrior,Orgrimmar,18446744073709551617,2008-12-03 12:20:00", "guild_id out of range"),
    ("7,99999999999999999999,Orc,Warrior,Orgrimmar,6,2008-12-03 12:20:00", "level out of range"),
])
def test_parse_line_errors(line, reason):
    with pytest.raises(ParseError) as info:
        parse_snapshot_line(line, line_number=4)
    assert reason in str(info.value)
    assert info.value.line_number == 4


def test_int64_edges_parse_exactly():
    top = parse_snapshot_line("9223372036854775807,80,Orc,Warrior,Orgrimmar,9007199254740993,2008-12-03 12:20:00")
    assert top.char_id == 2 ** 63 - 1
    assert top.guild_id == 2 ** 53 + 1
    bottom = parse_snapshot_line("-9223372036854775808,80,Orc,Warrior,Orgrimmar,+0006,2008-12-03 12:20:00")
    assert bottom.char_id == -(2 ** 63)
    assert bottom.guild_id == 6
    with pytest.raises(ParseError, match="char_id out of range"):
        parse_snapshot_line("9223372036854775808,80,Orc,Warrior,Orgrimmar,6,2008-12-03 12:20:00")


def test_quoted_field_round_trip():
    schema = TraceSchema()
    record = parse_snapshot_line('7,80,Orc,Warrior,"Dalaran, Violet Hold",6,2008-12-03 12:20:00', schema)
    assert record.zone == "Dalaran, Violet Hold"
    assert parse_snapshot_line(format_snapshot_line(record, schema), schema) == record


def test_lenient_ingest_counts_rejects(write_lines):
    lines = [_line(GOOD[0]), _line(GOOD[1]),
             "2,81,Orc,Mage,Durotar,,2008-01-01 00:10:00", _line(GOOD[2])]
    path = write_lines("a.csv", lines)
    result = ingest_traces([path])
    assert result.stats.rows_read == 4
    assert result.stats.rows_rejected == 1
    assert result.stats.rows_accepted == 3
    assert result.rejects[0].line_number == 3
    assert result.rejects[0].path == str(path)
    assert result.stats.unique_characters == 2


def test_oversized_guild_rejects_one_row(write_lines):
    path = write_lines("a.csv", [_line(GOOD[0]), "2,70,Orc,Mage,Durotar,18446744073709551617,2008-01-01 00:10:00"])
    result = ingest_traces([path])
    assert result.stats.rows_accepted == 1
    assert result.stats.rows_rejected == 1
    assert result.rejects[0].reason == "guild_id out of range"
    assert result.rejects[0].line_number == 2


def test_undecodable_line_rejects_only_that_line(tmp_path):
    path = tmp_path / "a.csv"
    good = "\n".join(_line(row) for row in GOOD[:2]) + "\n"
    path.write_bytes(good.encode("utf-8") + b"3,70,Or\xffc,Warrior,Durotar,,2008-01-01 00:10:00\n")
    result = ingest_traces([path])
    assert result.stats.rows_read == 3
    assert result.stats.rows_accepted == 2
    assert result.stats.rows_rejected == 1
    assert result.rejects[0].line_number == 3
    assert "invalid UTF-8" in result.rejects[0].reason
    with pytest.raises(ParseError, match="invalid UTF-8") as info:
        ingest_traces([path], TraceSchema(strict=True))
    assert info.value.line_number == 3


def test_strict_ingest_aborts_on_first_bad_row(write_lines):
    lines = [_line(GOOD[0]), "2,81,Orc,Mage,Durotar,,2008-01-01 00:10:00", "bad"]
    path = write_lines("a.csv", lines)
    with pytest.raises(ParseError) as info:
        ingest_traces([path], TraceSchema(strict=True))
    assert info.value.line_number == 2


def test_strict_mode_checks_vocabularies(write_rows):
    path = write_rows("a.csv", [(1, 10, "Gnome", "Warrior", "Durotar", None, "2008-01-01 00:10:00")])
    assert ingest_traces([path]).stats.rows_accepted == 1
    with pytest.raises(ParseError, match="unknown race"):
        ingest_traces([path], TraceSchema(strict=True))


def test_duplicate_rows_across_files(write_rows):
    a = write_rows("a.csv", [GOOD[0]])
    b = write_rows("b.csv", [GOOD[0]])
    stats = ingest_traces([a, b]).stats
    assert stats.rows_accepted == 1
    assert stats.duplicates_dropped == 1


def test_duplicate_tie_break_is_argument_order_independent(write_rows):
    a = write_rows("a.csv", [(1, 12, "Orc", "Warrior", "Durotar", 5, "2008-01-01 00:10:00")])
    b = write_rows("b.csv", [(1, 10, "Orc", "Warrior", "Durotar", 5, "2008-01-01 00:10:00")])
    forward = ingest_traces([a, b]).frame
    backward = ingest_traces([b, a]).frame
    pd.testing.assert_frame_equal(forward, backward)
    assert forward["level"].tolist() == [10]


def test_interleaved_files_merge_sorted(write_rows):
    a = write_rows("a.csv", [GOOD[2], GOOD[0]])
    b = write_rows("b.csv", [GOOD[1], (4, 20, "Undead", "Mage", "Undercity", 9, "2008-01-01 00:00:00")])
    frame = ingest_traces([a, b]).frame
    assert frame["timestamp"].is_monotonic_increasing
    assert len(frame) == 4


def test_threads_do_not_change_output(write_rows):
    paths = [
        write_rows(f"part{i}.csv", [(i, 10 + i, "Orc", "Warrior", "Durotar", None, f"2008-01-0{i} 00:{10 * j:02d}:00")
                                   for j in range(5)])
        for i in range(1, 5)
    ]
    serial = ingest_traces(paths, threads=1).frame
    parallel = ingest_traces(paths, threads=4).frame
    pd.testing.assert_frame_equal(serial, parallel)


def test_spilled_sort_matches_in_memory(write_rows):
    a = write_rows("a.csv", [GOOD[2], GOOD[0], GOOD[1]])
    b = write_rows("b.csv", [GOOD[0], (4, 20, "Undead", "Mage", "Undercity", 9, "2008-01-01 00:00:00")])
    in_memory = ingest_traces([a, b]).frame
    spilled = ingest_traces([a, b], spill_rows=2).frame
    pd.testing.assert_frame_equal(in_memory, spilled)


def test_spilled_ingest_streams_from_disk(write_rows):
    a = write_rows("a.csv", [GOOD[2], GOOD[0], GOOD[1]])
    b = write_rows("b.csv", [GOOD[0], (4, 20, "Undead", "Mage", "Undercity", 9, "2008-01-01 00:00:00")])
    in_memory = ingest_traces([a, b])
    spilled = ingest_traces([a, b], spill_rows=2)
    assert in_memory.spilled is None
    assert spilled.spilled is not None
    assert spilled.stats == in_memory.stats
    assert list(spilled.records()) == list(in_memory.records())
    pd.testing.assert_frame_equal(spilled.frame, in_memory.frame)
    spilled.close()
    assert not spilled.spilled.path.exists()


def test_spiller_keeps_at_most_run_rows_in_memory(make_frame):
    rows = [(i, 10, "Orc", "Warrior", "Durotar", None, f"2008-01-01 00:{10 * (5 - i):02d}:00") for i in range(6)]
    frame = make_frame(rows + [rows[0]])
    spiller = RunSpiller(run_rows=2)
    for i in range(len(frame)):
        spiller.add(frame.iloc[[i]])
        assert spiller.resident_rows <= 2
    assert len(spiller.run_paths) >= 2

    merged = spiller.finish()
    assert isinstance(merged, SpilledTrace)
    assert merged.rows == 6
    assert [len(chunk) for chunk in merged.iter_frames(chunk_rows=4)] == [4, 2]
    pd.testing.assert_frame_equal(merged.load(), canonical_sort(frame))
    merged.close()
    assert not merged.path.exists()


def test_external_sort_matches_canonical_sort(make_frame):
    frame = make_frame([
        GOOD[2], GOOD[1], GOOD[0], GOOD[0],
        (2, 3, "Tauren", "Druid", "Mulgore", None, "2008-01-01 00:10:00"),
    ])
    expected = canonical_sort(frame)
    merged = external_canonical_sort([frame.iloc[:2], frame.iloc[2:]], run_rows=1)
    pd.testing.assert_frame_equal(expected, merged)


def test_missing_file_is_an_os_error(tmp_path):
    with pytest.raises(FileNotFoundError):
        ingest_traces([tmp_path / "nope.csv"])


def test_header_and_column_order(write_lines):
    schema = TraceSchema(
        columns=["timestamp", "char_id", "level", "race", "char_class", "zone", "guild_id"],
        delimiter=";",
        header=True,
    )
    path = write_lines("a.csv", [
        "timestamp;char_id;level;race;char_class;zone;guild_id",
        "2008-01-01 00:10:00;1;10;Orc;Warrior;Durotar;5",
    ])
    records = list(ingest_traces([path], schema).records())
    assert len(records) == 1
    assert records[0].char_id == 1 and records[0].guild_id == 5


def test_write_trace_reads_back(tmp_path, make_frame):
    frame = canonical_sort(make_frame(list(GOOD)))
    path = write_trace(frame, tmp_path / "trace.csv")
    pd.testing.assert_frame_equal(ingest_traces([path]).frame, frame)


def test_synthetic_corpus_with_rejects(tmp_path, two_group_synth):
    frame, _ = generate_traces(two_group_synth)
    assert len(frame) >= 997
    path = write_trace(frame.head(997), tmp_path / "trace.csv")
    with open(path, "a", encoding="utf-8") as f:
        f.write("1,0,Orc,Warrior,Durotar,,2008-01-01 00:00:00\n")
        f.write("1,10,Orc,Warrior,Durotar,,yesterday\n")
        f.write("1,10,Orc\n")
    stats = ingest_traces([path]).stats
    assert stats.rows_read == 1000
    assert stats.rows_rejected == 3
    assert stats.rows_accepted == 997
    assert stats.duplicates_dropped == 0


def test_window_filter_closed_interval(make_frame):
    frame = make_frame([
        (1, 10, "Orc", "Warrior", "Durotar", None, "2008-01-01 00:00:00"),
        (1, 10, "Orc", "Warrior", "Durotar", None, "2008-01-31 23:50:00"),
        (1, 10, "Orc", "Warrior", "Durotar", None, "2008-02-01 00:00:00"),
    ])
    start, end = datetime(2008, 1, 1), datetime(2008, 1, 31, 23, 50)
    kept = window_filter(frame, start, end)
    assert len(kept) == 2
    assert len(window_filter(frame, start, datetime(2008, 1, 31, 23, 49, 59))) == 1
    assert len(list(window_filter(iter_records(frame), start, end))) == 2


def test_window_filter_month_tally(two_group_synth):
    frame, _ = generate_traces(two_group_synth)
    february = window_filter(frame, datetime(2008, 2, 1), datetime(2008, 2, 29, 23, 50))
    assert len(february) == int((frame["timestamp"].dt.month == 2).sum())


def test_window_filter_rejects_reversed_window(make_frame):
    with pytest.raises(ValueError):
        window_filter(make_frame(list(GOOD)), datetime(2008, 2, 1), datetime(2008, 1, 1))
