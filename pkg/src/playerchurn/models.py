"""Domain records: snapshots, ingest summaries, player profiles and survival observations"""
from dataclasses import dataclass, field
from datetime import datetime
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

MAX_LEVEL = 80
SLOT_MINUTES = 10
SLOTS_PER_DAY = 24 * 60 // SLOT_MINUTES  # 144 snapshots per day
HOURS_PER_SNAPSHOT = SLOT_MINUTES / 60.0

LEVEL_INTERVALS: Tuple[str, ...] = (
    "0-9", "10-19", "20-29", "30-39", "40-49", "50-59", "60-69", "70-79", "80",
)

LevelLabel = Literal["0-9", "10-19", "20-29", "30-39", "40-49", "50-59", "60-69", "70-79", "80"]


class SnapshotRecord(BaseModel):
    """One 10-minute observation of one character"""
    model_config = ConfigDict(frozen=True)

    char_id: int
    level: int = Field(ge=1, le=MAX_LEVEL)
    race: str
    char_class: str
    zone: str
    guild_id: Optional[int] = None
    timestamp: datetime

    @field_validator("timestamp")
    @classmethod
    def _aligned(cls, value: datetime) -> datetime:
        if value.minute % SLOT_MINUTES or value.second or value.microsecond:
            raise ValueError(f"timestamp {value} is not on a {SLOT_MINUTES}-minute boundary")
        return value


class IngestStats(BaseModel):
    """Counters for one ingest run; reproduces the dataset summary row"""
    rows_read: int = 0
    rows_accepted: int = 0
    rows_rejected: int = 0
    duplicates_dropped: int = 0
    unique_characters: int = 0
    unique_races: int = 0
    unique_classes: int = 0
    unique_zones: int = 0
    unique_guilds: int = 0
    unique_timestamps: int = 0
    window_start: Optional[datetime] = None
    window_end: Optional[datetime] = None

    @model_validator(mode="after")
    def _balanced(self) -> "IngestStats":
        total = self.rows_accepted + self.rows_rejected + self.duplicates_dropped
        if self.rows_read != total:
            raise ValueError(
                f"rows_read={self.rows_read} but accepted+rejected+duplicates={total}"
            )
        return self

    def to_rows(self) -> List[Tuple[str, str]]:
        """name,value pairs in declaration order"""
        rows = []
        for name, value in self.model_dump().items():
            if isinstance(value, datetime):
                value = value.strftime("%Y-%m-%d %H:%M:%S")
            rows.append((name, "" if value is None else str(value)))
        return rows


class LevelInterval(BaseModel):
    """Decade bucket of a character level; level 80 has its own bucket"""
    model_config = ConfigDict(frozen=True)

    label: LevelLabel


class PlayerProfile(BaseModel):
    """Per-character activity aggregate over the observation window"""
    model_config = ConfigDict(frozen=True)

    char_id: int
    first_seen: datetime
    last_seen: datetime
    lifetime_days: int = Field(ge=0)
    active_days: int = Field(ge=1)
    snapshot_count: int = Field(ge=1)
    avg_daily_hours: float = Field(ge=0.0, le=24.0)
    playing_density: float = Field(gt=0.0, le=1.0)
    max_level: int = Field(ge=1, le=MAX_LEVEL)
    level_interval: LevelInterval
    in_guild: bool
    distinct_zones: int = Field(ge=1)
    race: str
    char_class: str

    @model_validator(mode="after")
    def _consistent(self) -> "PlayerProfile":
        if self.active_days > self.lifetime_days + 1:
            raise ValueError("active_days exceeds the observed span")
        if self.snapshot_count < self.active_days:
            raise ValueError("snapshot_count is below active_days")
        if self.last_seen < self.first_seen:
            raise ValueError("last_seen precedes first_seen")
        return self


class SurvivalObservation(BaseModel):
    """(duration, event) pair; event=False means censored"""
    model_config = ConfigDict(frozen=True)

    duration_days: int = Field(ge=0)
    event: bool
    char_id: Optional[int] = None


@dataclass(frozen=True)
class FeatureMatrix:
    """Row-per-player numeric matrix plus binary churn labels"""
    feature_names: List[str]
    char_ids: np.ndarray
    rows: np.ndarray
    labels: np.ndarray
    label_name: str = "churn"
    meta: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.rows.ndim != 2:
            raise ValueError("rows must be a 2-D array")
        if self.rows.shape[1] != len(self.feature_names):
            raise ValueError(
                f"row width {self.rows.shape[1]} != {len(self.feature_names)} feature names"
            )
        if len(self.labels) != self.rows.shape[0] or len(self.char_ids) != self.rows.shape[0]:
            raise ValueError("labels/char_ids length does not match row count")
        if not np.all(np.isfinite(self.rows)):
            raise ValueError("feature matrix contains non-finite values")

    @property
    def n_rows(self) -> int:
        return int(self.rows.shape[0])

    def select(self, columns: List[int]) -> "FeatureMatrix":
        """Column subset, same rows and labels"""
        return FeatureMatrix(
            feature_names=[self.feature_names[c] for c in columns],
            char_ids=self.char_ids,
            rows=self.rows[:, columns],
            labels=self.labels,
            label_name=self.label_name,
            meta=dict(self.meta),
        )

    def take(self, indices: np.ndarray) -> "FeatureMatrix":
        """Row subset"""
        return FeatureMatrix(
            feature_names=list(self.feature_names),
            char_ids=self.char_ids[indices],
            rows=self.rows[indices],
            labels=self.labels[indices],
            label_name=self.label_name,
            meta=dict(self.meta),
        )
