"""Confusion counts, ROC/AUC, stratified folds, search and feature selection"""
import json
import math

import numpy as np
import pytest
from scipy import stats
from sklearn.metrics import roc_auc_score

from playerchurn.config import Config
from playerchurn.evaluation import (
    accuracy_at, anova_f, confusion, cross_validate, grid_search, random_search, rfe, rfe_with_trace,
    roc_auc, score_rows, selection_report, stratified_kfold, train_test_split, univariate_select,
)
from playerchurn.learners import Standardizer, fit_kmeans, fit_pca, make_model
from playerchurn.profiles import assemble_dataset, build_profiles, filter_trial
from playerchurn.schemas import RunConfig, SynthConfig, SynthGroupSpec, WindowSpec
from playerchurn.synth import generate_traces


def test_confusion_counts():
    cm = confusion([1, 0, 1, 0, 1], [1, 1, 0, 0, 1])
    assert (cm.tp, cm.fp, cm.tn, cm.fn) == (2, 1, 1, 1)
    assert cm.accuracy == pytest.approx(0.6)
    assert cm.tpr == pytest.approx(2 / 3)
    assert confusion([0, 0], [0, 1]).tpr is None
    with pytest.raises(ValueError):
        confusion([0, 1], [0, 2])
    with pytest.raises(ValueError):
        confusion([0, 1], [0])


def test_accuracy_at_threshold():
    assert accuracy_at([0, 1, 1], [0.2, 0.5, 0.9]) == 1.0
    assert accuracy_at([0, 1, 1], [0.2, 0.5, 0.9], threshold=0.6) == pytest.approx(2 / 3)


@pytest.mark.parametrize("labels, scores, expected", [
    ([0, 1], [0.1, 0.9], 1.0),
    ([0, 0, 1, 1], [0.1, 0.4, 0.35, 0.8], 0.75),
    ([0, 1, 0, 1], [0.5, 0.5, 0.5, 0.5], 0.5),
    ([1, 0], [0.1, 0.9], 0.0),
    ([1, 0, 0, 1], [0.9, 0.2, 0.8, 0.3], 0.75),
])
def test_auc_examples(labels, scores, expected):
    assert roc_auc(labels, scores).auc == pytest.approx(expected)


def test_auc_matches_pairwise_count_with_ties():
    rng = np.random.default_rng(15)
    labels = (rng.random(500) < 0.4).astype(int)
    scores = rng.integers(0, 10, size=500).astype(float) + labels
    pos, neg = scores[labels == 1], scores[labels == 0]
    wins = (pos[:, None] > neg[None, :]).sum() + 0.5 * (pos[:, None] == neg[None, :]).sum()
    expected = wins / (pos.size * neg.size)
    assert roc_auc(labels, scores).auc == pytest.approx(expected, rel=1e-12)
    assert roc_auc(labels, scores).auc == pytest.approx(roc_auc_score(labels, scores), rel=1e-12)


def test_auc_ignores_increasing_transforms_and_flips_under_negation():
    rng = np.random.default_rng(19)
    for _ in range(50):
        labels = (rng.random(60) < 0.5).astype(int)
        labels[:2] = [0, 1]
        scores = rng.integers(-5, 6, size=60).astype(float) + 0.5 * labels
        auc = roc_auc(labels, scores).auc
        assert roc_auc(labels, np.exp(scores)).auc == pytest.approx(auc, abs=1e-12)
        assert roc_auc(labels, 3.0 * scores + 7.0).auc == pytest.approx(auc, abs=1e-12)
        assert roc_auc(labels, -scores).auc == pytest.approx(1.0 - auc, abs=1e-12)


def test_roc_curve_shape():
    curve = roc_auc([0, 0, 1, 1], [0.1, 0.4, 0.35, 0.8])
    assert math.isinf(curve.thresholds[0])
    assert (curve.fpr[0], curve.tpr[0]) == (0.0, 0.0)
    assert (curve.fpr[-1], curve.tpr[-1]) == (1.0, 1.0)
    assert list(curve.to_frame().columns) == ["threshold", "fpr", "tpr"]
    with pytest.raises(ValueError):
        roc_auc([1, 1], [0.2, 0.3])


def test_stratified_folds_small():
    labels = [0] * 5 + [1] * 5
    plan = stratified_kfold(labels, 5, seed=3)
    for train, val in plan:
        assert sorted(np.asarray(labels)[val].tolist()) == [0, 1]
        assert train.size == 8


def test_stratified_folds_are_balanced_and_seeded():
    labels = np.r_[np.zeros(66, dtype=int), np.ones(37, dtype=int)]
    plan = stratified_kfold(labels, 10, seed=1)
    sizes = np.bincount(plan.folds, minlength=10)
    positives = np.bincount(plan.folds[labels == 1], minlength=10)
    assert sizes.max() - sizes.min() <= 1
    assert positives.max() - positives.min() <= 1
    assert np.array_equal(plan.folds, stratified_kfold(labels, 10, seed=1).folds)
    assert not np.array_equal(plan.folds, stratified_kfold(labels, 10, seed=2).folds)
    with pytest.raises(ValueError):
        stratified_kfold([0] * 20 + [1] * 3, 5)
    with pytest.raises(ValueError):
        plan.split(10)


@pytest.fixture
def small_data(separable_data):
    X, y = separable_data
    return X[:100], y[:100]


def test_singleton_grid_equals_cross_validation(small_data):
    X, y = small_data
    plan = stratified_kfold(y, 5, seed=0)
    search = grid_search("lr", {"C": [25.0]}, X, y, plan)
    assert len(search.results) == 1
    assert search.best.fold_scores == cross_validate("lr", {"C": 25.0}, X, y, plan).fold_scores
    assert search.best_score == pytest.approx(np.mean(search.best.fold_scores))


def test_grid_search_finds_planted_config(small_data):
    X, y = small_data
    plan = stratified_kfold(y, 5, seed=0)
    search = grid_search("lr", {"C": [1e-6, 25.0]}, X, y, plan)
    assert search.results[0].fold_scores == [0.5] * 5
    assert search.best_params == {"C": 25.0}
    frame = search.to_frame()
    assert list(frame.columns) == ["model", "params", "fold", "metric", "value"]
    assert len(frame) == 2 * (5 + 1)


def test_failed_configuration_scores_worst(small_data):
    X, y = small_data
    plan = stratified_kfold(y, 5, seed=0)
    search = grid_search("knn", {"n_neighbors": [3, 10_000]}, X, y, plan)
    assert search.results[1].failed
    assert search.results[1].mean_score == float("-inf")
    assert search.best_params == {"n_neighbors": 3}


def test_random_search_covering_grid_equals_grid_search(small_data):
    X, y = small_data
    plan = stratified_kfold(y, 5, seed=0)
    grid = {"n_neighbors": [1, 3, 5], "p": [1, 2]}
    full = grid_search("knn", grid, X, y, plan)
    covered = random_search("knn", grid, 100, 7, X, y, plan)
    assert [r.params for r in covered.results] == [r.params for r in full.results]
    assert [r.fold_scores for r in covered.results] == [r.fold_scores for r in full.results]


def test_random_search_is_seeded(small_data):
    X, y = small_data
    plan = stratified_kfold(y, 5, seed=0)
    grid = {"n_neighbors": [1, 3, 5, 7], "p": [1, 2]}
    a = random_search("knn", grid, 3, 7, X, y, plan)
    b = random_search("knn", grid, 3, 7, X, y, plan)
    assert [r.params for r in a.results] == [r.params for r in b.results]
    assert len(random_search("knn", grid, 1, 7, X, y, plan).results) == 1
    with pytest.raises(ValueError):
        random_search("knn", grid, 0, 7, X, y, plan)


def test_search_threads_do_not_change_scores(small_data):
    X, y = small_data
    plan = stratified_kfold(y, 5, seed=0)
    grid = {"n_estimators": [5], "max_depth": [2, 4]}
    serial = grid_search("rf", grid, X, y, plan, seed=1)
    parallel = grid_search("rf", grid, X, y, plan, seed=1, threads=4)
    assert [r.fold_scores for r in serial.results] == [r.fold_scores for r in parallel.results]


def test_anova_matches_scipy():
    rng = np.random.default_rng(16)
    X = rng.normal(size=(80, 4))
    y = (rng.random(80) < 0.5).astype(int)
    X[y == 1, 0] += 1.0
    expected = stats.f_oneway(X[y == 0], X[y == 1], axis=0).statistic
    assert anova_f(X, y) == pytest.approx(expected, rel=1e-9)


def test_anova_label_copy_wins():
    rng = np.random.default_rng(17)
    y = (rng.random(50) < 0.5).astype(int)
    X = np.column_stack([rng.normal(size=50), y.astype(float), np.ones(50)])
    scores = anova_f(X, y)
    assert math.isinf(scores[1])
    assert scores[2] == 0.0
    assert univariate_select(X, y, 1) == [1]
    assert univariate_select(X, y, 3) == [1, 0, 2]
    with pytest.raises(ValueError):
        univariate_select(X, y, 4)


@pytest.fixture
def one_informative():
    rng = np.random.default_rng(18)
    y = (rng.random(120) < 0.5).astype(int)
    X = rng.normal(size=(120, 7))
    X[:, 2] += 2.0 * y
    return X, y


def test_rfe_keeps_informative_feature(one_informative):
    X, y = one_informative
    assert rfe(X, y, 1) == [2]
    assert rfe(X, y, 7) == list(range(7))


def test_rfe_round_count(one_informative):
    X, y = one_informative
    remaining, rounds = rfe_with_trace(X, y, keep=2, step=2)
    assert len(rounds) == math.ceil((7 - 2) / 2)
    assert [len(r) for r in rounds] == [2, 2, 1]
    assert len(remaining) == 2 and 2 in remaining


def test_selection_report(one_informative):
    X, y = one_informative
    names = [f"f{i}" for i in range(7)]
    report = selection_report(names, X, y, keep=3)
    assert list(report.columns) == ["feature", "f_score", "f_rank", "rfe_round"]
    assert sorted(report["f_rank"].tolist()) == list(range(1, 8))
    assert report.loc[2, "f_rank"] == 1
    assert (report["rfe_round"] == 0).sum() == 3
    assert report.loc[2, "rfe_round"] == 0


def _churn_matrix(groups, features, players=1200, seed=31):
    config = SynthConfig(players=players, window_days=365, seed=seed,
                         groups=[SynthGroupSpec(**g) for g in groups])
    frame, _ = generate_traces(config)
    window = WindowSpec(start=config.window_start, end=config.window_end)
    table = filter_trial(build_profiles(frame, window), 30)
    return assemble_dataset(table, features, gap_days=60)


@pytest.fixture(scope="module")
def tuned_presets():
    data = json.loads(Config.DEFAULT_RUN_CONFIG.read_text(encoding="utf-8"))
    return RunConfig.model_validate(data)


@pytest.fixture(scope="module")
def level_churn():
    """Stayers sit at level 40; churners are fresh level-1 or capped level-80 characters"""
    common = dict(activity_probability=1.0, mean_snapshots_per_day=1.0, level_up_probability=0.0)
    return _churn_matrix(
        [
            dict(name="stayers", fraction=0.5, mean_lifetime_days=1e6, guild_probability=0.95,
                 start_level=40, **common),
            dict(name="novices", fraction=0.25, mean_lifetime_days=100.0, guild_probability=0.05,
                 start_level=1, **common),
            dict(name="veterans", fraction=0.25, mean_lifetime_days=100.0, guild_probability=0.05,
                 start_level=80, **common),
        ],
        ["max_level", "in_guild"],
    )


@pytest.fixture(scope="module")
def habit_churn():
    """Stayers play most days for hours; churners drop in now and then"""
    return _churn_matrix(
        [
            dict(name="stayers", fraction=0.5, mean_lifetime_days=1e6, activity_probability=0.9,
                 mean_snapshots_per_day=6.0, guild_probability=0.9),
            dict(name="casuals", fraction=0.5, mean_lifetime_days=150.0, activity_probability=0.3,
                 mean_snapshots_per_day=2.0, guild_probability=0.1),
        ],
        ["avg_daily_hours", "playing_density", "in_guild"],
        players=800,
    )


@pytest.mark.slow
def test_classifiers_on_synthetic_churn(level_churn, tuned_presets):
    y = level_churn.labels
    train, test = train_test_split(y, seed=3)
    scaler = Standardizer().fit(level_churn.rows[train])
    X_train, X_test = scaler.transform(level_churn.rows[train]), scaler.transform(level_churn.rows[test])

    aucs = {}
    for family in ("lr", "svm", "knn", "rf"):
        model = make_model(family, tuned_presets.preset("paper", family), seed=3)
        model.fit(X_train, y[train])
        aucs[family] = roc_auc(y[test], score_rows(model, X_test)).auc
    assert min(aucs.values()) >= 0.85, aucs
    assert aucs["rf"] >= aucs["lr"], aucs


@pytest.mark.slow
def test_pca_kmeans_matches_plain_kmeans(habit_churn):
    y = habit_churn.labels
    train, test = train_test_split(y, seed=4)
    scaler = Standardizer().fit(habit_churn.rows[train])
    X_train, X_test = scaler.transform(habit_churn.rows[train]), scaler.transform(habit_churn.rows[test])

    accuracies = {}
    for components in (None, 2, 3):
        fit_rows, eval_rows = X_train, X_test
        if components is not None:
            pca = fit_pca(X_train, components)
            fit_rows, eval_rows = pca.transform(X_train), pca.transform(X_test)
        model = fit_kmeans(fit_rows, 2, seed=4, labels=y[train])
        accuracies[components] = confusion(y[test], model.predict(eval_rows)).accuracy
    assert accuracies[None] >= 0.8, accuracies
    assert abs(accuracies[2] - accuracies[None]) <= 0.02, accuracies
    assert abs(accuracies[3] - accuracies[None]) <= 0.02, accuracies
