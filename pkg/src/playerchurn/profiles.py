"""Per-player activity profiles, churn labelling and dataset assembly"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Literal, Optional, Sequence, Union

import numpy as np
import pandas as pd

from .errors import DataError
from .models import (
    HOURS_PER_SNAPSHOT, LEVEL_INTERVALS, MAX_LEVEL, SLOTS_PER_DAY,
    FeatureMatrix, LevelInterval, PlayerProfile, SurvivalObservation,
)
from .schemas import DEFAULT_FEATURES, WOWAH_CLASSES, WOWAH_RACES, WindowSpec

logger = logging.getLogger(__name__)

DensityMode = Literal["span", "slots"]

NUMERIC_FEATURES = (
    "avg_daily_hours", "playing_density", "in_guild", "max_level",
    "active_days", "lifetime_days", "snapshot_count", "distinct_zones",
)
CATEGORICAL_FEATURES = ("race", "char_class", "level_interval")

PROFILE_COLUMNS = [
    "char_id", "first_seen", "last_seen", "first_day", "last_day", "lifetime_days",
    "active_days", "snapshot_count", "avg_daily_hours", "playing_density", "max_level",
    "level_interval", "in_guild", "distinct_zones", "race", "char_class",
]


def discretize_level(level: int) -> LevelInterval:
    """Decade bucket for a level; 80 gets its own bucket"""
    if not 1 <= level <= MAX_LEVEL:
        raise ValueError(f"level {level} outside 1..{MAX_LEVEL}")
    return LevelInterval(label=LEVEL_INTERVALS[level // 10])


def level_interval_labels(levels: Union[np.ndarray, pd.Series]) -> np.ndarray:
    """Vectorised discretize_level"""
    levels = np.asarray(levels, dtype=np.int64)
    if levels.size and (levels.min() < 1 or levels.max() > MAX_LEVEL):
        raise ValueError(f"levels outside 1..{MAX_LEVEL}")
    return np.asarray(LEVEL_INTERVALS, dtype=object)[levels // 10]


def _as_window(window: Union[WindowSpec, Sequence]) -> WindowSpec:
    if isinstance(window, WindowSpec):
        return window
    start, end = window
    return WindowSpec(start=start, end=end)


@dataclass
class ProfileTable:
    """One row per character (ascending char_id) plus each character's active day indices"""
    frame: pd.DataFrame
    activity: Dict[int, np.ndarray]
    window: WindowSpec
    density_mode: DensityMode = "span"
    meta: Dict[str, str] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.frame)

    def subset(self, mask: Union[np.ndarray, pd.Series]) -> "ProfileTable":
        frame = self.frame[np.asarray(mask, dtype=bool)].reset_index(drop=True)
        activity = {int(c): self.activity[int(c)] for c in frame["char_id"]}
        return ProfileTable(frame=frame, activity=activity, window=self.window,
                            density_mode=self.density_mode, meta=dict(self.meta))

    def profiles(self) -> Iterator[PlayerProfile]:
        for row in self.frame.itertuples(index=False):
            yield PlayerProfile(
                char_id=int(row.char_id),
                first_seen=pd.Timestamp(row.first_seen).to_pydatetime(),
                last_seen=pd.Timestamp(row.last_seen).to_pydatetime(),
                lifetime_days=int(row.lifetime_days),
                active_days=int(row.active_days),
                snapshot_count=int(row.snapshot_count),
                avg_daily_hours=float(row.avg_daily_hours),
                playing_density=float(row.playing_density),
                max_level=int(row.max_level),
                level_interval=LevelInterval(label=row.level_interval),
                in_guild=bool(row.in_guild),
                distinct_zones=int(row.distinct_zones),
                race=row.race,
                char_class=row.char_class,
            )

    def profile(self, char_id: int) -> PlayerProfile:
        match = self.subset(self.frame["char_id"] == char_id)
        if not len(match):
            raise KeyError(f"no profile for char_id {char_id}")
        return next(match.profiles())


def _day_index(stamps: pd.Series, window: WindowSpec) -> np.ndarray:
    origin = pd.Timestamp(window.start).normalize()
    return ((stamps.dt.normalize() - origin) // pd.Timedelta(days=1)).to_numpy(dtype=np.int64)


def build_profiles(records: pd.DataFrame, window: Union[WindowSpec, Sequence],
                   density_mode: DensityMode = "span") -> ProfileTable:
    """
    Fold a timestamp-sorted snapshot frame into per-character profiles.

    Each snapshot stands for 10 minutes of play. Day indices count calendar
    days from the window start.
    """
    window = _as_window(window)
    if density_mode not in ("span", "slots"):
        raise ValueError(f"unknown density mode '{density_mode}'")

    stamps = records["timestamp"]
    in_window = records[(stamps >= pd.Timestamp(window.start)) & (stamps <= pd.Timestamp(window.end))]
    if in_window.empty:
        empty = pd.DataFrame({c: pd.Series([], dtype=object) for c in PROFILE_COLUMNS})
        return ProfileTable(frame=empty, activity={}, window=window, density_mode=density_mode)

    # Stable sort keeps chronological order within each character
    data = in_window.assign(day=_day_index(in_window["timestamp"], window))
    data = data.sort_values(["char_id", "timestamp"], kind="mergesort")

    grouped = data.groupby("char_id", sort=True)
    frame = pd.DataFrame({
        "first_seen": grouped["timestamp"].min(),
        "last_seen": grouped["timestamp"].max(),
        "first_day": grouped["day"].min(),
        "last_day": grouped["day"].max(),
        "active_days": grouped["day"].nunique(),
        "snapshot_count": grouped.size(),
        "max_level": grouped["level"].max(),
        "in_guild": grouped["guild_id"].count() > 0,
        "distinct_zones": grouped["zone"].nunique(),
        "race": grouped["race"].last(),
        "char_class": grouped["char_class"].last(),
    }).reset_index()

    frame["lifetime_days"] = frame["last_day"] - frame["first_day"]
    frame["avg_daily_hours"] = frame["snapshot_count"] * HOURS_PER_SNAPSHOT / frame["active_days"]
    if density_mode == "span":
        frame["playing_density"] = frame["active_days"] / (frame["lifetime_days"] + 1)
    else:
        frame["playing_density"] = frame["snapshot_count"] / (SLOTS_PER_DAY * frame["active_days"])
    frame["level_interval"] = level_interval_labels(frame["max_level"])
    frame = frame[PROFILE_COLUMNS]

    days = data[["char_id", "day"]].drop_duplicates().sort_values(["char_id", "day"], kind="mergesort")
    char_ids = days["char_id"].to_numpy()
    day_values = days["day"].to_numpy(dtype=np.int64)
    boundaries = np.flatnonzero(np.diff(char_ids)) + 1
    activity = {
        int(chunk_ids[0]): chunk_days
        for chunk_ids, chunk_days in zip(np.split(char_ids, boundaries), np.split(day_values, boundaries))
    }

    logger.info(f"built {len(frame)} profiles from {len(data)} snapshots ({density_mode} density)")
    return ProfileTable(frame=frame, activity=activity, window=window, density_mode=density_mode)


def filter_trial(profiles: Union[ProfileTable, Iterable[PlayerProfile]], min_days: int = 30):
    """Drop characters observed for fewer than min_days days (unconverted trials)"""
    if min_days < 0:
        raise ValueError("min_days must be >= 0")
    if isinstance(profiles, ProfileTable):
        kept = profiles.subset(profiles.frame["lifetime_days"] >= min_days)
        logger.info(f"trial filter ({min_days}d): kept {len(kept)} of {len(profiles)}")
        return kept
    return [p for p in profiles if p.lifetime_days >= min_days]


def label_churn(profile: Optional[PlayerProfile], activity_days: Sequence[int], gap_days: int,
                window: Union[WindowSpec, Sequence]) -> SurvivalObservation:
    """
    Survival observation for one character under a churn gap.

    Churn is the first inactivity gap of at least gap_days, including the
    terminal gap from the last active day to the day after the window ends.
    Duration counts from the first active day to the start of that gap, or to
    the last active day when censored.
    """
    if gap_days <= 0:
        raise ValueError("gap_days must be > 0")
    days = np.asarray(activity_days, dtype=np.int64)
    if days.size == 0:
        raise ValueError("activity_days is empty")
    window = _as_window(window)
    char_id = profile.char_id if profile is not None else None
    return _label_days(days, gap_days, window.days, char_id)


def _label_days(days: np.ndarray, gap_days: int, window_days: int,
                char_id: Optional[int]) -> SurvivalObservation:
    gaps = np.diff(days)
    hits = np.flatnonzero(gaps >= gap_days)
    if hits.size:
        return SurvivalObservation(char_id=char_id, duration_days=int(days[hits[0]] - days[0]), event=True)
    if window_days - days[-1] >= gap_days:
        return SurvivalObservation(char_id=char_id, duration_days=int(days[-1] - days[0]), event=True)
    return SurvivalObservation(char_id=char_id, duration_days=int(days[-1] - days[0]), event=False)


def label_table(table: ProfileTable, gap_days: int) -> pd.DataFrame:
    """label_churn for every profile: columns char_id, duration_days, event"""
    if gap_days <= 0:
        raise ValueError("gap_days must be > 0")
    window_days = table.window.days
    char_ids = table.frame["char_id"].to_numpy(dtype=np.int64)
    durations = np.zeros(len(char_ids), dtype=np.int64)
    events = np.zeros(len(char_ids), dtype=bool)
    for i, char_id in enumerate(char_ids):
        obs = _label_days(table.activity[int(char_id)], gap_days, window_days, int(char_id))
        durations[i] = obs.duration_days
        events[i] = obs.event
    return pd.DataFrame({"char_id": char_ids, "duration_days": durations, "event": events})


def observations(table: ProfileTable, gap_days: int) -> List[SurvivalObservation]:
    labels = label_table(table, gap_days)
    return [
        SurvivalObservation(char_id=int(c), duration_days=int(d), event=bool(e))
        for c, d, e in labels.itertuples(index=False)
    ]


def default_vocabularies(races: Optional[List[str]] = None,
                         classes: Optional[List[str]] = None) -> Dict[str, List[str]]:
    return {
        "race": list(races or WOWAH_RACES),
        "char_class": list(classes or WOWAH_CLASSES),
        "level_interval": list(LEVEL_INTERVALS),
    }


def assemble_dataset(table: ProfileTable, feature_spec: Optional[Sequence[str]] = None,
                     gap_days: int = 180,
                     vocabularies: Optional[Dict[str, List[str]]] = None) -> FeatureMatrix:
    """Numeric matrix (ascending char_id) with one-hot categoricals and churn_<gap> labels"""
    feature_spec = list(feature_spec or DEFAULT_FEATURES)
    vocabularies = vocabularies or default_vocabularies()
    unknown = [f for f in feature_spec if f not in NUMERIC_FEATURES and f not in CATEGORICAL_FEATURES]
    if unknown:
        raise ValueError(f"unknown feature(s): {unknown}")

    frame = table.frame
    names: List[str] = []
    columns: List[np.ndarray] = []
    for feature in feature_spec:
        if feature in NUMERIC_FEATURES:
            names.append(feature)
            columns.append(frame[feature].to_numpy(dtype=np.float64))
        else:
            values = frame[feature].to_numpy(dtype=object)
            for category in vocabularies[feature]:
                names.append(f"{feature}={category}")
                columns.append((values == category).astype(np.float64))

    n = len(frame)
    rows = np.column_stack(columns) if columns else np.zeros((n, 0))
    rows = rows.reshape(n, len(names))
    labels = label_table(table, gap_days)["event"].to_numpy(dtype=np.int64)
    return FeatureMatrix(
        feature_names=names,
        char_ids=frame["char_id"].to_numpy(dtype=np.int64),
        rows=rows,
        labels=labels,
        label_name=f"churn_{gap_days}",
        meta={"gap_days": str(gap_days), "density_mode": table.density_mode},
    )


def write_profiles(table: ProfileTable, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(exist_ok=True, parents=True)
    out = table.frame.copy()
    out["in_guild"] = out["in_guild"].astype(int)
    out.to_csv(path, index=False, date_format="%Y-%m-%d %H:%M:%S", float_format="%.10g",
               lineterminator="\n")
    return path


def write_dataset(matrix: FeatureMatrix, path: Union[str, Path]) -> Path:
    """Feature matrix CSV: char_id, features..., churn_<gap>"""
    path = Path(path)
    path.parent.mkdir(exist_ok=True, parents=True)
    out = pd.DataFrame(matrix.rows, columns=matrix.feature_names)
    out.insert(0, "char_id", matrix.char_ids)
    out[matrix.label_name] = matrix.labels
    out.to_csv(path, index=False, float_format="%.10g", lineterminator="\n")
    return path


def read_dataset(path: Union[str, Path]) -> FeatureMatrix:
    """Load a CSV written by write_dataset"""
    path = Path(path)
    frame = pd.read_csv(path)
    columns = list(frame.columns)
    if len(columns) < 3 or columns[0] != "char_id" or not columns[-1].startswith("churn"):
        raise DataError(f"{path}: expected columns char_id, features..., churn_<gap>")
    label_name = columns[-1]
    labels = frame[label_name].to_numpy()
    if not np.isin(labels, (0, 1)).all():
        raise DataError(f"{path}: {label_name} must hold 0/1 labels")
    try:
        rows = frame[columns[1:-1]].to_numpy(dtype=np.float64)
    except ValueError as e:
        raise DataError(f"{path}: non-numeric feature column ({e})") from e
    if not np.all(np.isfinite(rows)):
        raise DataError(f"{path}: feature matrix contains missing or non-finite values")
    gap = label_name.partition("_")[2]
    return FeatureMatrix(
        feature_names=columns[1:-1],
        char_ids=frame["char_id"].to_numpy(dtype=np.int64),
        rows=rows,
        labels=labels.astype(np.int64),
        label_name=label_name,
        meta={"gap_days": gap} if gap else {},
    )
