"""Pydantic schemas for run configuration files and synthetic-trace settings"""
from datetime import datetime, timedelta
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

CANONICAL_COLUMNS = ("char_id", "level", "race", "char_class", "zone", "guild_id", "timestamp")

WOWAH_RACES = ["Blood Elf", "Orc", "Tauren", "Troll", "Undead"]
WOWAH_CLASSES = [
    "Death Knight", "Druid", "Hunter", "Mage", "Paladin",
    "Priest", "Rogue", "Shaman", "Warlock", "Warrior",
]

DEFAULT_FEATURES = [
    "avg_daily_hours",
    "playing_density",
    "in_guild",
    "max_level",
    "active_days",
    "lifetime_days",
    "snapshot_count",
    "distinct_zones",
]

MONTH_GAP_DAYS = {2: 60, 3: 90, 4: 120, 6: 180}


class TraceSchema(BaseModel):
    """Column mapping and vocabularies for delimited trace files"""
    columns: List[str] = Field(default_factory=lambda: list(CANONICAL_COLUMNS))
    delimiter: str = ","
    header: bool = False
    timestamp_format: str = "%Y-%m-%d %H:%M:%S"
    races: List[str] = Field(default_factory=lambda: list(WOWAH_RACES))
    classes: List[str] = Field(default_factory=lambda: list(WOWAH_CLASSES))
    strict: bool = False

    @field_validator("columns")
    @classmethod
    def _permutation(cls, value: List[str]) -> List[str]:
        if sorted(value) != sorted(CANONICAL_COLUMNS):
            raise ValueError(f"columns must be a permutation of {list(CANONICAL_COLUMNS)}, got {value}")
        return value

    @field_validator("delimiter")
    @classmethod
    def _single_char(cls, value: str) -> str:
        if len(value) != 1:
            raise ValueError("delimiter must be a single character")
        return value


class WindowSpec(BaseModel):
    """Closed observation window [start, end]"""
    start: datetime
    end: datetime

    @model_validator(mode="after")
    def _ordered(self) -> "WindowSpec":
        if self.start > self.end:
            raise ValueError(f"window start {self.start} is after end {self.end}")
        return self

    @property
    def days(self) -> int:
        """Calendar days covered, both ends inclusive"""
        return (self.end.date() - self.start.date()).days + 1


class SvgSettings(BaseModel):
    width: int = Field(default=640, gt=0)
    height: int = Field(default=400, gt=0)
    margin: int = Field(default=50, ge=0)


class RunConfig(BaseModel):
    """Everything a reproducible batch run needs"""
    inputs: List[str] = Field(default_factory=list)
    trace_schema: TraceSchema = Field(default_factory=TraceSchema)
    window: Optional[WindowSpec] = None
    gap_days: int = Field(default=180, gt=0)
    gaps: List[int] = Field(default_factory=lambda: sorted(MONTH_GAP_DAYS.values()))
    trial_days: int = Field(default=30, gt=0)
    features: List[str] = Field(default_factory=lambda: list(DEFAULT_FEATURES))
    density_mode: Literal["span", "slots"] = "span"
    presets: Dict[str, Dict[str, Dict[str, Any]]] = Field(default_factory=dict)
    seed: int = 2008
    threads: int = Field(default=1, ge=1)
    output_dir: str = "out"
    spill_rows: int = Field(default=2_000_000, ge=1)
    cv_folds: int = Field(default=10, ge=2)
    threshold: float = Field(default=0.5, gt=0.0, lt=1.0)
    hours_thresholds: List[float] = Field(default_factory=lambda: [1.0, 2.0])
    density_threshold: float = Field(default=0.5, gt=0.0, le=1.0)
    percentiles: List[float] = Field(default_factory=lambda: [25.0, 50.0, 75.0, 90.0, 95.0, 99.0])
    svg: SvgSettings = Field(default_factory=SvgSettings)
    synth: Optional["SynthConfig"] = None

    @field_validator("gaps")
    @classmethod
    def _positive_gaps(cls, value: List[int]) -> List[int]:
        if not value or any(g <= 0 for g in value):
            raise ValueError("gaps must be a non-empty list of positive day counts")
        return value

    def preset(self, name: str, family: str) -> Dict[str, Any]:
        """Hyperparameters for one model family under a named preset"""
        if name not in self.presets:
            raise ValueError(f"unknown preset '{name}' (known: {sorted(self.presets)})")
        return dict(self.presets[name].get(family, {}))


class SynthGroupSpec(BaseModel):
    """Ground-truth behaviour of one synthetic player group"""
    name: str
    fraction: float = Field(gt=0.0, le=1.0)
    mean_lifetime_days: float = Field(gt=0.0)
    activity_probability: float = Field(gt=0.0, le=1.0)
    mean_snapshots_per_day: float = Field(ge=1.0, le=144.0)
    guild_probability: float = Field(default=0.5, ge=0.0, le=1.0)
    start_level: int = Field(default=1, ge=1, le=80)
    level_up_probability: float = Field(default=0.3, ge=0.0, le=1.0)


class SynthConfig(BaseModel):
    """Synthetic trace generator settings"""
    players: int = Field(gt=0)
    window_days: int = Field(default=365, gt=0)
    window_start: datetime = datetime(2008, 1, 1)
    groups: List[SynthGroupSpec]
    seed: int = 0
    join_spread_days: int = Field(default=0, ge=0)
    races: List[str] = Field(default_factory=lambda: list(WOWAH_RACES))
    classes: List[str] = Field(default_factory=lambda: list(WOWAH_CLASSES))
    zones: List[str] = Field(default_factory=lambda: [
        "Orgrimmar", "Durotar", "The Barrens", "Undercity", "Silvermoon City",
        "Dalaran", "Borean Tundra", "Howling Fjord", "Shattrath City", "Stranglethorn Vale",
    ])
    guild_count: int = Field(default=40, gt=0)

    @model_validator(mode="after")
    def _fractions(self) -> "SynthConfig":
        if not self.groups:
            raise ValueError("at least one group is required")
        total = sum(g.fraction for g in self.groups)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"group fractions sum to {total}, expected 1")
        if self.join_spread_days >= self.window_days:
            raise ValueError("join_spread_days must be shorter than the window")
        if not self.races or not self.classes or not self.zones:
            raise ValueError("races, classes and zones must be non-empty")
        return self

    @property
    def window_end(self) -> datetime:
        return self.window_start + timedelta(days=self.window_days) - timedelta(minutes=10)


RunConfig.model_rebuild()
