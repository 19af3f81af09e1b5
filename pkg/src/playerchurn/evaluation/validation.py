"""Stratified k-fold plans, cross-validation and hyperparameter search"""
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from sklearn.base import clone
from sklearn.model_selection import ParameterGrid

from ..learners import make_model
from ..learners.preprocessing import Standardizer, check_labels, check_matrix
from .metrics import confusion, roc_auc

logger = logging.getLogger(__name__)

METRICS = ("roc_auc", "accuracy")
WORST_SCORE = float("-inf")


@dataclass(frozen=True)
class CvPlan:
    """Fold id per sample"""
    k: int
    seed: int
    folds: np.ndarray

    def split(self, fold: int) -> Tuple[np.ndarray, np.ndarray]:
        """(train indices, validation indices) for one fold"""
        if not 0 <= fold < self.k:
            raise ValueError(f"fold {fold} outside 0..{self.k - 1}")
        return np.flatnonzero(self.folds != fold), np.flatnonzero(self.folds == fold)

    def __iter__(self) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
        for fold in range(self.k):
            yield self.split(fold)


def stratified_kfold(labels, k: int, seed: int = 0) -> CvPlan:
    """
    Seeded shuffle inside each class, then round-robin over folds. The round
    robin continues from class 0 into class 1 so fold sizes stay balanced.
    """
    y = np.asarray(labels)
    if k < 2:
        raise ValueError("k must be >= 2")
    rng = np.random.default_rng(seed)
    folds = np.empty(y.size, dtype=np.int64)
    offset = 0
    for cls in np.unique(y):
        members = np.flatnonzero(y == cls)
        if members.size < k:
            raise ValueError(f"class {cls} has {members.size} samples, fewer than k={k}")
        shuffled = rng.permutation(members)
        folds[shuffled] = (offset + np.arange(shuffled.size)) % k
        offset = (offset + shuffled.size) % k
    return CvPlan(k=k, seed=seed, folds=folds)


def train_test_split(labels, seed: int = 0, test_fold: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """Stratified 80/20 split: one held-out fold of a 5-fold plan"""
    return stratified_kfold(labels, 5, seed).split(test_fold)


def fold_score(estimator, X_train: np.ndarray, y_train: np.ndarray, X_val: np.ndarray,
               y_val: np.ndarray, metric: str = "roc_auc", threshold: float = 0.5,
               standardize: bool = True) -> float:
    """Fit a clone on the training rows (standardizer fit there too) and score the validation rows"""
    if standardize:
        scaler = Standardizer().fit(X_train)
        X_train, X_val = scaler.transform(X_train), scaler.transform(X_val)
    model = clone(estimator).fit(X_train, y_train)
    if metric == "roc_auc":
        return roc_auc(y_val, score_rows(model, X_val)).auc
    if metric == "accuracy":
        return confusion(y_val, predict_rows(model, X_val, threshold)).accuracy
    raise ValueError(f"metric must be one of {METRICS}")


def score_rows(model, X: np.ndarray) -> np.ndarray:
    """Probability of churn where the model has one, else its decision value"""
    if hasattr(model, "predict_proba"):
        return model.predict_proba(X)[:, 1]
    return model.decision_function(X)


def predict_rows(model, X: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    if hasattr(model, "predict_proba"):
        return (model.predict_proba(X)[:, 1] >= threshold).astype(np.int64)
    return model.predict(X)


@dataclass
class ConfigResult:
    params: Dict[str, Any]
    fold_scores: List[float]
    failed: bool = False

    @property
    def mean_score(self) -> float:
        return WORST_SCORE if self.failed else float(np.mean(self.fold_scores))


@dataclass
class SearchResult:
    family: str
    metric: str
    results: List[ConfigResult] = field(default_factory=list)

    @property
    def best(self) -> ConfigResult:
        # First configuration wins ties
        best = self.results[0]
        for result in self.results[1:]:
            if result.mean_score > best.mean_score:
                best = result
        return best

    @property
    def best_params(self) -> Dict[str, Any]:
        return dict(self.best.params)

    @property
    def best_score(self) -> float:
        return self.best.mean_score

    def to_frame(self) -> pd.DataFrame:
        """Metrics report rows: model,params,fold,metric,value (fold 'mean' per config)"""
        rows = []
        for result in self.results:
            params = json.dumps(result.params, sort_keys=True)
            for fold, score in enumerate(result.fold_scores):
                rows.append({"model": self.family, "params": params, "fold": str(fold),
                             "metric": self.metric, "value": score})
            rows.append({"model": self.family, "params": params, "fold": "mean",
                         "metric": self.metric, "value": result.mean_score})
        return pd.DataFrame(rows, columns=["model", "params", "fold", "metric", "value"])


def _evaluate(family: str, configs: Sequence[Mapping[str, Any]], X, y, cv_plan: CvPlan,
              metric: str, seed: int, threads: int, threshold: float,
              base_params: Optional[Mapping[str, Any]], standardize: bool) -> SearchResult:
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}")
    X = check_matrix(X)
    y = check_labels(y, X.shape[0])
    estimators = [make_model(family, {**(base_params or {}), **cfg}, seed=seed) for cfg in configs]
    tasks = [(c, fold) for c in range(len(configs)) for fold in range(cv_plan.k)]

    def run(task: Tuple[int, int]) -> Optional[float]:
        c, fold = task
        train_idx, val_idx = cv_plan.split(fold)
        try:
            return fold_score(estimators[c], X[train_idx], y[train_idx], X[val_idx], y[val_idx],
                              metric, threshold, standardize)
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as e:
            logger.warning(f"{family} {dict(configs[c])} fold {fold} failed: {e}")
            return None

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            scores = list(executor.map(run, tasks))
    else:
        scores = [run(t) for t in tasks]

    result = SearchResult(family=family, metric=metric)
    for c, cfg in enumerate(configs):
        chunk = scores[c * cv_plan.k:(c + 1) * cv_plan.k]
        failed = any(s is None for s in chunk)
        result.results.append(ConfigResult(
            params=dict(cfg),
            fold_scores=[WORST_SCORE if s is None else s for s in chunk],
            failed=failed,
        ))
    logger.info(f"{family}: {len(configs)} configs x {cv_plan.k} folds, "
                f"best {metric}={result.best_score:.4f} at {result.best_params}")
    return result


def grid_search(family: str, grid: Mapping[str, Sequence[Any]], X, y, cv_plan: CvPlan,
                metric: str = "roc_auc", seed: int = 0, threads: int = 1, threshold: float = 0.5,
                base_params: Optional[Mapping[str, Any]] = None, standardize: bool = True) -> SearchResult:
    """Every configuration of the Cartesian grid, in ParameterGrid order"""
    if not grid or any(len(v) == 0 for v in grid.values()):
        raise ValueError("grid must be non-empty with non-empty value lists")
    configs = list(ParameterGrid(dict(grid)))
    return _evaluate(family, configs, X, y, cv_plan, metric, seed, threads, threshold,
                     base_params, standardize)


def random_search(family: str, grid: Mapping[str, Sequence[Any]], n_iter: int, seed: int, X, y,
                  cv_plan: CvPlan, metric: str = "roc_auc", threads: int = 1, threshold: float = 0.5,
                  base_params: Optional[Mapping[str, Any]] = None,
                  standardize: bool = True) -> SearchResult:
    """
    n_iter configurations drawn without replacement from the grid. When n_iter
    covers the grid, every configuration is evaluated in grid order.
    """
    if n_iter < 1:
        raise ValueError("n_iter must be >= 1")
    if not grid or any(len(v) == 0 for v in grid.values()):
        raise ValueError("grid must be non-empty with non-empty value lists")
    every = ParameterGrid(dict(grid))
    if n_iter >= len(every):
        configs = list(every)
    else:
        picks = np.random.default_rng(seed).choice(len(every), size=n_iter, replace=False)
        configs = [every[int(i)] for i in picks]
    return _evaluate(family, configs, X, y, cv_plan, metric, seed, threads, threshold,
                     base_params, standardize)


def cross_validate(family: str, params: Mapping[str, Any], X, y, cv_plan: CvPlan,
                   metric: str = "roc_auc", seed: int = 0, threads: int = 1,
                   threshold: float = 0.5) -> ConfigResult:
    """Fold scores for one fixed configuration"""
    return _evaluate(family, [dict(params)], X, y, cv_plan, metric, seed, threads, threshold,
                     None, True).results[0]

