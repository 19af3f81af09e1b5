"""Synthetic snapshot traces generated from a known ground-truth behaviour model"""
import logging
import math
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np
import pandas as pd

from .external_sort import canonical_sort, empty_trace_frame
from .models import MAX_LEVEL, SLOT_MINUTES, SLOTS_PER_DAY
from .schemas import SynthConfig, SynthGroupSpec

logger = logging.getLogger(__name__)

# Shortest lifetime a draw can produce: one 10-minute slot
MIN_LIFETIME_DAYS = SLOT_MINUTES / (24 * 60)

TRUTH_COLUMNS = [
    "char_id", "group", "join_day", "lifetime_days", "churned", "churn_day", "active_days",
]


def allocate_groups(players: int, fractions: List[float]) -> np.ndarray:
    """Players per group by largest remainder; earlier groups win equal remainders"""
    exact = np.asarray(fractions, dtype=np.float64) * players
    counts = np.floor(exact).astype(np.int64)
    short = players - int(counts.sum())
    order = np.argsort(-(exact - counts), kind="stable")
    counts[order[:short]] += 1
    return counts


def _player(char_id: int, group: SynthGroupSpec, config: SynthConfig,
            rng: np.random.Generator) -> Tuple[dict, dict]:
    """One player's columns (minute offsets from window start) and ground-truth row"""
    join_day = int(rng.integers(0, config.join_spread_days + 1)) if config.join_spread_days else 0
    lifetime = max(float(rng.exponential(group.mean_lifetime_days)), MIN_LIFETIME_DAYS)
    race = config.races[int(rng.integers(len(config.races)))]
    char_class = config.classes[int(rng.integers(len(config.classes)))]
    guild = int(rng.integers(1, config.guild_count + 1)) if rng.random() < group.guild_probability else None

    # Candidate days d satisfy join_day <= d < join_day + lifetime, inside the window
    last_candidate = min(config.window_days, math.ceil(join_day + lifetime))
    candidates = np.arange(join_day, last_candidate)
    active = rng.random(candidates.size) < group.activity_probability
    active[0] = True
    days = candidates[active]

    per_day = np.minimum(1 + rng.poisson(group.mean_snapshots_per_day - 1.0, size=days.size), SLOTS_PER_DAY)
    slots = [np.sort(rng.choice(SLOTS_PER_DAY, size=int(n), replace=False)) for n in per_day]
    level_ups = rng.random(days.size) < group.level_up_probability
    level_ups[0] = False
    levels = np.minimum(group.start_level + np.cumsum(level_ups), MAX_LEVEL)

    minutes = np.concatenate([d * 24 * 60 + s * SLOT_MINUTES for d, s in zip(days, slots)])
    count = minutes.size
    columns = {
        "char_id": np.full(count, char_id, dtype=np.int64),
        "level": np.repeat(levels, per_day),
        "race": np.full(count, race, dtype=object),
        "char_class": np.full(count, char_class, dtype=object),
        "zone": np.asarray(config.zones, dtype=object)[rng.integers(len(config.zones), size=count)],
        "guild_id": np.full(count, guild if guild is not None else -1, dtype=np.int64),
        "minutes": minutes,
    }

    churn_day = join_day + math.ceil(lifetime)
    churned = churn_day < config.window_days
    truth = {
        "char_id": char_id,
        "group": group.name,
        "join_day": join_day,
        "lifetime_days": lifetime,
        "churned": churned,
        "churn_day": churn_day if churned else pd.NA,
        "active_days": int(days.size),
    }
    return columns, truth


def generate_traces(config: SynthConfig) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """
    (canonically sorted snapshot frame, ground-truth table). Player i draws from
    default_rng([seed, i]), so the output depends only on the config.
    """
    counts = allocate_groups(config.players, [g.fraction for g in config.groups])
    parts: List[dict] = []
    truths: List[dict] = []
    char_id = 0
    for group, n in zip(config.groups, counts):
        for _ in range(int(n)):
            char_id += 1
            rng = np.random.default_rng([config.seed, char_id])
            columns, truth = _player(char_id, group, config, rng)
            parts.append(columns)
            truths.append(truth)

    if not parts:
        return empty_trace_frame(), pd.DataFrame(columns=TRUTH_COLUMNS)

    merged = {key: np.concatenate([p[key] for p in parts]) for key in parts[0]}
    guild = pd.array(merged["guild_id"], dtype="Int64")
    guild[merged["guild_id"] < 0] = pd.NA
    frame = pd.DataFrame({
        "char_id": merged["char_id"],
        "level": merged["level"].astype(np.int64),
        "race": merged["race"],
        "char_class": merged["char_class"],
        "zone": merged["zone"],
        "guild_id": guild,
        "timestamp": pd.Timestamp(config.window_start) + pd.to_timedelta(merged["minutes"], unit="m"),
    })
    frame = canonical_sort(frame)

    truth = pd.DataFrame(truths, columns=TRUTH_COLUMNS)
    truth["churn_day"] = truth["churn_day"].astype("Int64")
    logger.info(f"synthesized {len(frame)} snapshots for {config.players} players "
                f"in {len(config.groups)} groups")
    return frame, truth


def write_ground_truth(truth: pd.DataFrame, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(exist_ok=True, parents=True)
    truth.to_csv(path, index=False, na_rep="", float_format="%.10g", lineterminator="\n")
    return path
