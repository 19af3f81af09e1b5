"""Synthetic trace generator"""
import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

from playerchurn.schemas import SynthConfig, SynthGroupSpec
from playerchurn.synth import (
    MIN_LIFETIME_DAYS, TRUTH_COLUMNS, _player, allocate_groups, generate_traces, write_ground_truth,
)


def _one_group(players=1, **kwargs):
    group = dict(name="g", fraction=1.0, mean_lifetime_days=1e6, activity_probability=1.0,
                 mean_snapshots_per_day=1.0)
    group.update(kwargs.pop("group", {}))
    return SynthConfig(players=players, groups=[SynthGroupSpec(**group)], **kwargs)


def test_always_active_player_covers_window():
    frame, truth = generate_traces(_one_group(window_days=10))
    assert len(frame) == 10
    assert frame["timestamp"].dt.normalize().nunique() == 10
    assert truth["active_days"].tolist() == [10]
    assert not truth["churned"].iloc[0]


def test_output_is_seeded(two_group_synth):
    frame, truth = generate_traces(two_group_synth)
    again, truth_again = generate_traces(two_group_synth)
    pd.testing.assert_frame_equal(frame, again)
    pd.testing.assert_frame_equal(truth, truth_again)
    other, _ = generate_traces(two_group_synth.model_copy(update={"seed": 12}))
    assert not frame.equals(other)


def test_frame_is_canonically_sorted(two_group_synth):
    frame, _ = generate_traces(two_group_synth)
    assert frame["timestamp"].is_monotonic_increasing
    assert frame["level"].between(1, 80).all()
    assert (frame["timestamp"].dt.minute % 10 == 0).all()


def test_ground_truth_table(tmp_path, two_group_synth):
    _, truth = generate_traces(two_group_synth)
    assert list(truth.columns) == TRUTH_COLUMNS
    assert truth["group"].value_counts().to_dict() == {"long": 200, "short": 200}
    churned = truth[truth["churned"]]
    assert (churned["churn_day"] < two_group_synth.window_days).all()
    assert truth.loc[~truth["churned"], "churn_day"].isna().all()
    path = write_ground_truth(truth, tmp_path / "ground_truth.csv")
    assert len(pd.read_csv(path)) == len(truth)


def test_first_snapshot_falls_on_join_day():
    config = _one_group(players=30, window_days=100, join_spread_days=20, seed=4,
                        group={"activity_probability": 0.5, "mean_lifetime_days": 40.0})
    frame, truth = generate_traces(config)
    days = (frame["timestamp"].dt.normalize() - pd.Timestamp(config.window_start)).dt.days
    first = days.groupby(frame["char_id"]).min()
    assert first.to_dict() == truth.set_index("char_id")["join_day"].to_dict()
    assert truth["join_day"].between(0, 20).all()


class _ZeroLifetime:
    """Generator whose exponential draws are exactly 0.0"""

    def __init__(self, seed):
        self._rng = np.random.default_rng(seed)

    def exponential(self, scale=1.0, size=None):
        return 0.0

    def __getattr__(self, name):
        return getattr(self._rng, name)


def test_zero_lifetime_draw_still_plays_one_day():
    config = _one_group(window_days=10)
    columns, truth = _player(1, config.groups[0], config, _ZeroLifetime(3))
    assert truth["lifetime_days"] == MIN_LIFETIME_DAYS
    assert truth["active_days"] == 1
    assert columns["minutes"].size >= 1
    assert truth["churned"] and truth["churn_day"] == 1


def test_levels_climb_to_the_cap_and_stop_at_churn():
    config = _one_group(players=20, window_days=60, seed=5,
                        group={"start_level": 78, "level_up_probability": 0.9, "mean_lifetime_days": 30.0,
                               "activity_probability": 0.7})
    frame, truth = generate_traces(config)
    ordered = frame.sort_values(["char_id", "timestamp"], kind="mergesort")
    assert (ordered.groupby("char_id")["level"].diff().dropna() >= 0).all()
    assert frame["level"].max() == 80

    days = (frame["timestamp"].dt.normalize() - pd.Timestamp(config.window_start)).dt.days
    last_day = days.groupby(frame["char_id"]).max()
    churned = truth[truth["churned"]].set_index("char_id")["churn_day"].astype("int64")
    assert len(churned) > 0
    assert (last_day.loc[churned.index] < churned).all()


@pytest.mark.parametrize("players, fractions, expected", [
    (10, [0.5, 0.5], [5, 5]),
    (10, [1 / 3, 1 / 3, 1 / 3], [4, 3, 3]),
    (7, [0.5, 0.25, 0.25], [3, 2, 2]),
])
def test_allocate_groups(players, fractions, expected):
    assert allocate_groups(players, fractions).tolist() == expected


def test_config_validation():
    with pytest.raises(ValidationError):
        SynthConfig(players=10, groups=[
            SynthGroupSpec(name="a", fraction=0.5, mean_lifetime_days=10, activity_probability=0.5,
                           mean_snapshots_per_day=2),
        ])
    with pytest.raises(ValidationError):
        _one_group(window_days=10, join_spread_days=10)


@pytest.mark.slow
def test_large_group_matches_its_parameters():
    config = _one_group(players=5000, window_days=2000, seed=8,
                        group={"mean_lifetime_days": 20.0, "activity_probability": 0.5,
                               "mean_snapshots_per_day": 4.0})
    frame, truth = generate_traces(config)
    assert truth["lifetime_days"].mean() == pytest.approx(20.0, rel=0.05)
    per_day = frame.groupby([frame["char_id"], frame["timestamp"].dt.normalize()]).size()
    assert per_day.mean() == pytest.approx(4.0, rel=0.05)
    # Day 0 is always active; the rest follow the activity probability
    candidates = np.minimum(np.ceil(truth["lifetime_days"]), 2000)
    extra = (truth["active_days"] - 1).sum() / (candidates - 1).sum()
    assert extra == pytest.approx(0.5, rel=0.05)
