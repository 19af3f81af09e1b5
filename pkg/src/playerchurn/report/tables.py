"""Distribution tables, activity series and playtime percentiles over traces and profiles"""
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

import numpy as np
import pandas as pd

from ..models import PlayerProfile
from ..profiles import ProfileTable, level_interval_labels

CHARACTER_KEYS = ("level", "level_interval", "race", "class", "race_class", "guild", "guild_class")
SNAPSHOT_KEYS = ("zone",)
FREQUENCY_KEYS = CHARACTER_KEYS + SNAPSHOT_KEYS

GRANULARITIES = ("hour", "day", "month", "weekday")
GROUP_KEYS = ("level_interval", "race", "char_class", "zone", "guild")
WEEKDAYS = ("Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun")
NO_GUILD = "no-guild"


@dataclass(frozen=True)
class FrequencyTable:
    """(value, count) rows, most frequent first; equal counts ordered by value"""
    key: str
    rows: pd.DataFrame

    @property
    def total(self) -> int:
        return int(self.rows["count"].sum())

    def count(self, value) -> int:
        match = self.rows.loc[self.rows["value"] == str(value), "count"]
        return int(match.iloc[0]) if len(match) else 0

    def to_frame(self) -> pd.DataFrame:
        return self.rows.rename(columns={"value": self.key})


def latest_snapshots(records: pd.DataFrame) -> pd.DataFrame:
    """Chronologically last snapshot of every character"""
    ordered = records.sort_values(["char_id", "timestamp"], kind="mergesort")
    return ordered.drop_duplicates("char_id", keep="last")


def _guild_label(guild: pd.Series) -> pd.Series:
    return guild.map(lambda g: NO_GUILD if pd.isna(g) else str(int(g))).astype(object)


def _character_values(frame: pd.DataFrame, key: str, from_profiles: bool) -> pd.Series:
    level = frame["max_level"] if from_profiles else frame["level"]
    if key == "level":
        return level.astype(np.int64).astype(str)
    if key == "level_interval":
        return pd.Series(level_interval_labels(level), index=frame.index)
    if key == "race":
        return frame["race"].astype(str)
    if key == "class":
        return frame["char_class"].astype(str)
    if key == "race_class":
        return frame["race"].astype(str) + "/" + frame["char_class"].astype(str)

    if from_profiles:
        guilded = frame["in_guild"].astype(bool).map({True: "guild", False: NO_GUILD})
    else:
        guilded = frame["guild_id"].isna().map({True: NO_GUILD, False: "guild"})
    if key == "guild":
        if from_profiles:
            return guilded
        return _guild_label(frame["guild_id"])
    return guilded + "/" + frame["char_class"].astype(str)


def frequency_table(source: Union[pd.DataFrame, ProfileTable], key: str) -> FrequencyTable:
    """
    Character-level keys count each character once (latest snapshot, or the
    profile row); zone counts snapshots. Profile input has no per-guild ids,
    so its guild key is the guild/no-guild flag, and it has no zones.
    """
    if key not in FREQUENCY_KEYS:
        raise ValueError(f"unknown frequency key '{key}' (known: {list(FREQUENCY_KEYS)})")

    from_profiles = isinstance(source, ProfileTable)
    frame = source.frame if from_profiles else source
    if key in SNAPSHOT_KEYS:
        if from_profiles:
            raise ValueError(f"key '{key}' needs snapshot records, not profiles")
        values = frame["zone"].astype(str)
    else:
        entities = frame if from_profiles else latest_snapshots(frame)
        values = _character_values(entities, key, from_profiles)

    counts = values.value_counts(sort=False)
    rows = pd.DataFrame({"value": counts.index.astype(str), "count": counts.to_numpy(dtype=np.int64)})
    rows = rows.sort_values(["count", "value"], ascending=[False, True], kind="mergesort")
    return FrequencyTable(key=key, rows=rows.reset_index(drop=True))


def _buckets(stamps: pd.Series, granularity: str) -> pd.Series:
    if granularity == "hour":
        return stamps.dt.hour
    if granularity == "day":
        return stamps.dt.strftime("%Y-%m-%d")
    if granularity == "month":
        return stamps.dt.strftime("%Y-%m")
    return stamps.dt.dayofweek


def _groups(records: pd.DataFrame, group_key: str) -> pd.Series:
    if group_key == "level_interval":
        return pd.Series(level_interval_labels(records["level"]), index=records.index)
    if group_key == "guild":
        return records["guild_id"].isna().map({True: NO_GUILD, False: "guild"})
    return records[group_key].astype(str)


def activity_series(records: pd.DataFrame, granularity: str,
                    group_key: Optional[str] = None) -> pd.DataFrame:
    """
    Distinct active characters per bucket (and group). hour is hour-of-day
    pooled over the window, day is the calendar date, month is YYYY-MM and
    weekday runs Mon..Sun.
    """
    if granularity not in GRANULARITIES:
        raise ValueError(f"unknown granularity '{granularity}' (known: {list(GRANULARITIES)})")
    if group_key is not None and group_key not in GROUP_KEYS:
        raise ValueError(f"unknown group key '{group_key}' (known: {list(GROUP_KEYS)})")

    keyed = pd.DataFrame({
        "bucket": _buckets(records["timestamp"], granularity),
        "group": _groups(records, group_key) if group_key else "all",
        "char_id": records["char_id"],
    })
    counts = (keyed.drop_duplicates()
              .groupby(["bucket", "group"], sort=True)["char_id"]
              .size()
              .rename("active_characters")
              .reset_index())
    if granularity == "weekday":
        counts["bucket"] = counts["bucket"].map(lambda d: WEEKDAYS[int(d)])
    counts["active_characters"] = counts["active_characters"].astype(np.int64)
    return counts[["bucket", "group", "active_characters"]]


def nearest_rank(sorted_values: np.ndarray, percentile: float) -> float:
    """Smallest value with at least percentile% of the data at or below it"""
    rank = max(1, math.ceil(percentile / 100.0 * sorted_values.size))
    return float(sorted_values[rank - 1])


def _hours(profiles) -> np.ndarray:
    if isinstance(profiles, ProfileTable):
        return profiles.frame["avg_daily_hours"].to_numpy(dtype=np.float64)
    if isinstance(profiles, pd.DataFrame):
        return profiles["avg_daily_hours"].to_numpy(dtype=np.float64)
    items = list(profiles)
    if items and isinstance(items[0], PlayerProfile):
        return np.array([p.avg_daily_hours for p in items], dtype=np.float64)
    return np.asarray(items, dtype=np.float64)


def playtime_percentiles(profiles: Union[ProfileTable, pd.DataFrame, Iterable[PlayerProfile]],
                         percentiles: Sequence[float] = (25, 50, 75, 90, 95, 99)) -> pd.DataFrame:
    """Nearest-rank percentiles of average daily hours, followed by a mean row"""
    hours = np.sort(_hours(profiles))
    if hours.size == 0:
        raise ValueError("playtime_percentiles needs at least one profile")
    if any(not 0 <= p <= 100 for p in percentiles):
        raise ValueError("percentiles must lie in [0, 100]")
    rows = [{"percentile": f"{p:g}", "hours": nearest_rank(hours, p)} for p in percentiles]
    rows.append({"percentile": "mean", "hours": float(hours.mean())})
    return pd.DataFrame(rows, columns=["percentile", "hours"])
