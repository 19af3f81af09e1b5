"""Cohort survival comparisons: guild, level interval, daily hours and playing density"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from .errors import DegenerateTestError, UndefinedRatioError
from .profiles import ProfileTable, label_table
from .survival import (
    LogRankResult, SurvivalCurve, churn_ratio, common_tau, km_estimate, log_rank, tau_sweep,
)

logger = logging.getLogger(__name__)

REFERENCE_INTERVAL = "70-79"

SUMMARY_COLUMNS = [
    "comparison", "reference", "group", "n_reference", "n_group", "tau_days",
    "churn_ratio", "chi_square", "p_value",
]


@dataclass(frozen=True)
class CohortComparison:
    """One group measured against a reference group under the same churn gap"""
    name: str
    reference: str
    group: str
    reference_curve: SurvivalCurve
    group_curve: SurvivalCurve
    tau: float
    churn_ratio: Optional[float]
    sweep: pd.DataFrame
    log_rank: Optional[LogRankResult]

    def summary(self) -> dict:
        return {
            "comparison": self.name,
            "reference": self.reference,
            "group": self.group,
            "n_reference": self.reference_curve.n_subjects,
            "n_group": self.group_curve.n_subjects,
            "tau_days": self.tau,
            "churn_ratio": self.churn_ratio if self.churn_ratio is not None else float("nan"),
            "chi_square": self.log_rank.chi_square if self.log_rank else float("nan"),
            "p_value": self.log_rank.p_value if self.log_rank else float("nan"),
        }


def compare_groups(name: str, reference_label: str, group_label: str,
                   reference: pd.DataFrame, group: pd.DataFrame,
                   tau_step: float = 30.0) -> Optional[CohortComparison]:
    """
    Curves, ratio at the common tau, tau sweep and log-rank for two label frames.

    Returns None when either side is empty.
    """
    if reference.empty or group.empty:
        logger.warning(f"{name}: skipping {group_label} vs {reference_label} (empty cohort)")
        return None

    ref_curve, group_curve = km_estimate(reference), km_estimate(group)
    tau = common_tau(ref_curve, group_curve)
    ratio: Optional[float] = None
    sweep = pd.DataFrame(columns=["tau_days", "rmst_reference", "rmst_group", "churn_ratio"])
    if tau > 0:
        try:
            ratio = churn_ratio(ref_curve, group_curve, tau)
        except UndefinedRatioError as e:
            logger.warning(f"{name}: {e}")
        sweep = tau_sweep(ref_curve, group_curve, step=tau_step)
    else:
        logger.warning(f"{name}: no common follow-up, churn ratio undefined")

    result: Optional[LogRankResult] = None
    try:
        result = log_rank(group, reference)
    except DegenerateTestError as e:
        logger.warning(f"{name}: log-rank skipped ({e})")

    return CohortComparison(
        name=name, reference=reference_label, group=group_label,
        reference_curve=ref_curve, group_curve=group_curve,
        tau=tau, churn_ratio=ratio, sweep=sweep, log_rank=result,
    )


def _labelled(table: ProfileTable, gap_days: int) -> pd.DataFrame:
    labels = label_table(table, gap_days)
    return table.frame.merge(labels, on="char_id", how="inner", validate="one_to_one")


def guild_comparison(labelled: pd.DataFrame, tau_step: float = 30.0) -> List[CohortComparison]:
    guilded = labelled["in_guild"].astype(bool)
    found = compare_groups("guild", "guild", "no-guild", labelled[guilded], labelled[~guilded], tau_step)
    return [found] if found else []


def level_comparisons(labelled: pd.DataFrame, tau_step: float = 30.0) -> List[CohortComparison]:
    reference = labelled[labelled["level_interval"] == REFERENCE_INTERVAL]
    comparisons = []
    for interval in sorted(set(labelled["level_interval"]) - {REFERENCE_INTERVAL},
                           key=lambda s: int(s.split("-")[0])):
        found = compare_groups("level_interval", REFERENCE_INTERVAL, interval, reference,
                               labelled[labelled["level_interval"] == interval], tau_step)
        if found:
            comparisons.append(found)
    return comparisons


def hours_comparisons(labelled: pd.DataFrame, thresholds: Sequence[float] = (1.0, 2.0),
                      tau_step: float = 30.0) -> List[CohortComparison]:
    """Bins split at the thresholds; the top bin is the reference"""
    edges = sorted(float(t) for t in thresholds)
    if not edges:
        raise ValueError("at least one hours threshold is required")
    hours = labelled["avg_daily_hours"].to_numpy(dtype=np.float64)
    bins = np.searchsorted(np.asarray(edges), hours, side="right")
    names = [f"<{edges[0]:g}h"]
    names += [f"{lo:g}-{hi:g}h" for lo, hi in zip(edges[:-1], edges[1:])]
    names.append(f">={edges[-1]:g}h")

    top = len(edges)
    reference = labelled[bins == top]
    comparisons = []
    for b in range(top):
        found = compare_groups("daily_hours", names[top], names[b], reference,
                               labelled[bins == b], tau_step)
        if found:
            comparisons.append(found)
    return comparisons


def density_comparison(labelled: pd.DataFrame, threshold: float = 0.5,
                       tau_step: float = 30.0) -> List[CohortComparison]:
    dense = labelled["playing_density"].to_numpy(dtype=np.float64) >= threshold
    found = compare_groups("playing_density", f">={threshold:g}", f"<{threshold:g}",
                           labelled[dense], labelled[~dense], tau_step)
    return [found] if found else []


def cohort_comparisons(table: ProfileTable, gap_days: int,
                       hours_thresholds: Sequence[float] = (1.0, 2.0),
                       density_threshold: float = 0.5,
                       tau_step: float = 30.0) -> List[CohortComparison]:
    """Every cohort comparison under one churn gap, in a fixed order"""
    labelled = _labelled(table, gap_days)
    comparisons = (
        guild_comparison(labelled, tau_step)
        + level_comparisons(labelled, tau_step)
        + hours_comparisons(labelled, hours_thresholds, tau_step)
        + density_comparison(labelled, density_threshold, tau_step)
    )
    logger.info(f"gap {gap_days}d: {len(comparisons)} cohort comparisons")
    return comparisons


def summary_frame(comparisons: Sequence[CohortComparison]) -> pd.DataFrame:
    return pd.DataFrame([c.summary() for c in comparisons], columns=SUMMARY_COLUMNS)


def sweep_frame(comparisons: Sequence[CohortComparison]) -> pd.DataFrame:
    """All tau sweeps stacked, keyed by comparison and group"""
    frames = []
    for c in comparisons:
        if c.sweep.empty:
            continue
        frames.append(c.sweep.assign(comparison=c.name, reference=c.reference, group=c.group))
    columns = ["comparison", "reference", "group", "tau_days", "rmst_reference", "rmst_group", "churn_ratio"]
    if not frames:
        return pd.DataFrame(columns=columns)
    return pd.concat(frames, ignore_index=True)[columns]
