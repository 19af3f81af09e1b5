"""Kaplan-Meier estimation, restricted mean survival time, churn ratios and the log-rank test"""
import logging
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import special

from .errors import DegenerateTestError, UndefinedRatioError
from .models import SurvivalObservation

logger = logging.getLogger(__name__)

ObservationsLike = Union[Sequence[SurvivalObservation], pd.DataFrame, Tuple[np.ndarray, np.ndarray]]

CURVE_COLUMNS = ["time_days", "at_risk", "events", "survival"]


def as_arrays(observations: ObservationsLike) -> Tuple[np.ndarray, np.ndarray]:
    """(durations, events) arrays from observations, a label frame or an array pair"""
    if isinstance(observations, pd.DataFrame):
        durations = observations["duration_days"].to_numpy(dtype=np.float64)
        events = observations["event"].to_numpy(dtype=bool)
    elif isinstance(observations, tuple) and len(observations) == 2:
        durations = np.asarray(observations[0], dtype=np.float64)
        events = np.asarray(observations[1], dtype=bool)
    else:
        obs = list(observations)
        durations = np.array([o.duration_days for o in obs], dtype=np.float64)
        events = np.array([o.event for o in obs], dtype=bool)
    if durations.shape != events.shape:
        raise ValueError("durations and events differ in length")
    if durations.size and (durations.min() < 0 or not np.all(np.isfinite(durations))):
        raise ValueError("durations must be finite and >= 0")
    return durations, events


@dataclass(frozen=True)
class SurvivalCurve:
    """Product-limit step function; survival[i] holds on [event_times[i], event_times[i+1])"""
    event_times: np.ndarray
    at_risk: np.ndarray
    events: np.ndarray
    survival: np.ndarray
    max_follow_up: float
    n_subjects: int

    def survival_at(self, t: float) -> float:
        """S(t), right-continuous"""
        idx = int(np.searchsorted(self.event_times, t, side="right")) - 1
        return 1.0 if idx < 0 else float(self.survival[idx])

    def to_frame(self) -> pd.DataFrame:
        """Export rows, led by (0, n, 0, 1.0)"""
        return pd.DataFrame({
            "time_days": np.concatenate([[0.0], self.event_times]),
            "at_risk": np.concatenate([[self.n_subjects], self.at_risk]).astype(np.int64),
            "events": np.concatenate([[0], self.events]).astype(np.int64),
            "survival": np.concatenate([[1.0], self.survival]),
        })[CURVE_COLUMNS]


@dataclass(frozen=True)
class LogRankResult:
    chi_square: float
    p_value: float
    observed_a: float
    expected_a: float
    variance: float


def km_estimate(observations: ObservationsLike) -> SurvivalCurve:
    """
    Kaplan-Meier product-limit estimate.

    A subject censored at t is still at risk for events at t.
    """
    durations, events = as_arrays(observations)
    n = durations.size
    if n == 0:
        raise ValueError("km_estimate needs at least one observation")

    ordered = np.sort(durations)
    event_times, deaths = np.unique(durations[events], return_counts=True)
    at_risk = n - np.searchsorted(ordered, event_times, side="left")
    survival = np.cumprod((at_risk - deaths) / at_risk)

    return SurvivalCurve(
        event_times=event_times.astype(np.float64),
        at_risk=at_risk.astype(np.int64),
        events=deaths.astype(np.int64),
        survival=survival.astype(np.float64),
        max_follow_up=float(ordered[-1]),
        n_subjects=int(n),
    )


def _curve(source: Union[SurvivalCurve, ObservationsLike]) -> SurvivalCurve:
    return source if isinstance(source, SurvivalCurve) else km_estimate(source)


def rmst(curve: SurvivalCurve, tau: float) -> float:
    """Area under the survival step function on [0, tau]"""
    if not 0 < tau <= curve.max_follow_up:
        raise ValueError(
            f"tau={tau} outside (0, {curve.max_follow_up}]; extrapolation past follow-up is refused"
        )
    before = curve.event_times < tau
    starts = np.concatenate([[0.0], curve.event_times[before]])
    levels = np.concatenate([[1.0], curve.survival[before]])
    widths = np.diff(np.concatenate([starts, [float(tau)]]))
    return float(np.sum(widths * levels))


def common_tau(*curves: SurvivalCurve) -> float:
    """Largest tau supported by every curve"""
    return float(min(c.max_follow_up for c in curves))


def churn_ratio(reference: Union[SurvivalCurve, ObservationsLike],
                group: Union[SurvivalCurve, ObservationsLike],
                tau: Optional[float] = None) -> float:
    """
    RMST(reference) / RMST(group) at tau (default: common follow-up).
    Above 1 means the group churns faster than the reference.
    """
    ref_curve, group_curve = _curve(reference), _curve(group)
    if tau is None:
        tau = common_tau(ref_curve, group_curve)
    if tau > ref_curve.max_follow_up or tau > group_curve.max_follow_up:
        raise ValueError(f"tau={tau} exceeds the follow-up of one of the groups")
    denominator = rmst(group_curve, tau)
    if denominator == 0:
        raise UndefinedRatioError(f"group RMST is 0 at tau={tau}")
    return rmst(ref_curve, tau) / denominator


def tau_grid(max_tau: float, step: float = 30.0) -> List[float]:
    """step, 2*step, ... up to and including max_tau"""
    if max_tau <= 0:
        raise ValueError("max_tau must be > 0")
    grid = [float(t) for t in np.arange(step, max_tau, step)]
    grid.append(float(max_tau))
    return grid


def tau_sweep(reference: Union[SurvivalCurve, ObservationsLike],
              group: Union[SurvivalCurve, ObservationsLike],
              taus: Optional[Iterable[float]] = None, step: float = 30.0) -> pd.DataFrame:
    """Churn-ratio sensitivity to tau over the groups' common support"""
    ref_curve, group_curve = _curve(reference), _curve(group)
    if taus is None:
        taus = tau_grid(common_tau(ref_curve, group_curve), step)
    rows = []
    for tau in taus:
        ref_area = rmst(ref_curve, tau)
        group_area = rmst(group_curve, tau)
        ratio = ref_area / group_area if group_area > 0 else float("nan")
        rows.append({"tau_days": float(tau), "rmst_reference": ref_area,
                     "rmst_group": group_area, "churn_ratio": ratio})
    return pd.DataFrame(rows, columns=["tau_days", "rmst_reference", "rmst_group", "churn_ratio"])


def median_survival(curve: SurvivalCurve) -> Optional[float]:
    """First event time with S <= 0.5, None if the curve never gets there"""
    hits = np.flatnonzero(curve.survival <= 0.5)
    return float(curve.event_times[hits[0]]) if hits.size else None


def chi_square_sf(statistic: float, dof: int = 1) -> float:
    """Upper tail of the chi-square distribution"""
    if statistic <= 0:
        return 1.0
    return float(special.gammaincc(dof / 2.0, statistic / 2.0))


def log_rank(group_a: ObservationsLike, group_b: ObservationsLike) -> LogRankResult:
    """Two-sample log-rank test (1 degree of freedom)"""
    dur_a, ev_a = as_arrays(group_a)
    dur_b, ev_b = as_arrays(group_b)
    if dur_a.size == 0 or dur_b.size == 0:
        raise ValueError("log_rank needs two non-empty groups")

    times = np.unique(np.concatenate([dur_a[ev_a], dur_b[ev_b]]))
    if times.size == 0:
        raise DegenerateTestError("no events in either group")

    sorted_a, sorted_b = np.sort(dur_a), np.sort(dur_b)
    n_a = (dur_a.size - np.searchsorted(sorted_a, times, side="left")).astype(np.float64)
    n_b = (dur_b.size - np.searchsorted(sorted_b, times, side="left")).astype(np.float64)
    events_a = np.sort(dur_a[ev_a])
    events_b = np.sort(dur_b[ev_b])
    d_a = (np.searchsorted(events_a, times, side="right")
           - np.searchsorted(events_a, times, side="left")).astype(np.float64)
    d_b = (np.searchsorted(events_b, times, side="right")
           - np.searchsorted(events_b, times, side="left")).astype(np.float64)

    n = n_a + n_b
    d = d_a + d_b
    share = n_a / n
    expected = d * share
    with np.errstate(divide="ignore", invalid="ignore"):
        v = np.where(n > 1, d * share * (1.0 - share) * (n - d) / (n - 1.0), 0.0)

    observed_a = float(d_a.sum())
    expected_a = float(expected.sum())
    variance = float(v.sum())
    if variance <= 0:
        raise DegenerateTestError("log-rank variance is zero")
    chi_square = (observed_a - expected_a) ** 2 / variance
    return LogRankResult(
        chi_square=float(chi_square),
        p_value=chi_square_sf(chi_square),
        observed_a=observed_a,
        expected_a=expected_a,
        variance=variance,
    )
