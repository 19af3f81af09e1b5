"""Univariate (ANOVA F) and recursive feature elimination"""
import logging
from typing import List, Sequence, Tuple

import numpy as np
import pandas as pd

from ..errors import DataError
from ..learners.linear import LogisticL1
from ..learners.preprocessing import Standardizer, check_labels, check_matrix

logger = logging.getLogger(__name__)


def anova_f(matrix, labels) -> np.ndarray:
    """
    One-way ANOVA F-score of every column between the label classes.
    A column with no variance at all scores 0; one that varies only between
    classes scores +inf.
    """
    X = check_matrix(matrix)
    y = np.asarray(labels)
    classes = np.unique(y)
    n, k = X.shape[0], classes.size
    if k < 2 or n <= k:
        raise ValueError("ANOVA needs two classes and more rows than classes")

    grand = X.mean(axis=0)
    between = np.zeros(X.shape[1])
    within = np.zeros(X.shape[1])
    for cls in classes:
        group = X[y == cls]
        centre = group.mean(axis=0)
        between += group.shape[0] * (centre - grand) ** 2
        within += ((group - centre) ** 2).sum(axis=0)

    with np.errstate(divide="ignore", invalid="ignore"):
        f = (between / (k - 1)) / (within / (n - k))
    f = np.where(within > 0, f, np.where(between > 0, np.inf, 0.0))
    return f


def _check_keep(keep: int, n_features: int):
    if not 1 <= keep <= n_features:
        raise ValueError(f"keep={keep} outside 1..{n_features}")


def univariate_select(matrix, labels, keep: int) -> List[int]:
    """Indices of the keep highest F-scores, best first; equal scores keep column order"""
    scores = anova_f(matrix, labels)
    _check_keep(keep, scores.size)
    order = np.argsort(-scores, kind="stable")
    return [int(i) for i in order[:keep]]


def rfe_with_trace(matrix, labels, keep: int, step: int = 1,
                   c: float = 25.0) -> Tuple[List[int], List[List[int]]]:
    """
    Recursive elimination with the L1 logistic model on standardized columns.
    Each round drops the `step` columns with the smallest |coefficient|.
    Returns (surviving indices ascending, columns dropped per round).
    """
    X = check_matrix(matrix)
    y = check_labels(labels, X.shape[0])
    _check_keep(keep, X.shape[1])
    if step < 1:
        raise ValueError("step must be >= 1")

    remaining = list(range(X.shape[1]))
    rounds: List[List[int]] = []
    while len(remaining) > keep:
        sub = Standardizer().fit_transform(X[:, remaining])
        try:
            model = LogisticL1(C=c).fit(sub, y)
        except ArithmeticError as e:
            raise DataError(f"RFE aborted: logistic fit failed on columns {remaining} ({e})") from e
        importance = np.abs(model.coef_)
        drop_count = min(step, len(remaining) - keep)
        dropped = sorted(remaining[i] for i in np.argsort(importance, kind="stable")[:drop_count])
        rounds.append(dropped)
        remaining = [f for f in remaining if f not in dropped]
        logger.debug(f"RFE round {len(rounds)}: dropped {dropped}")
    return remaining, rounds


def rfe(matrix, labels, keep: int, step: int = 1, c: float = 25.0) -> List[int]:
    return rfe_with_trace(matrix, labels, keep, step, c)[0]


def selection_report(feature_names: Sequence[str], matrix, labels, keep: int,
                     step: int = 1, c: float = 25.0) -> pd.DataFrame:
    """feature, f_score, f_rank, rfe_round (0 = survived)"""
    scores = anova_f(matrix, labels)
    order = np.argsort(-scores, kind="stable")
    ranks = np.empty(scores.size, dtype=np.int64)
    ranks[order] = np.arange(1, scores.size + 1)
    _, rounds = rfe_with_trace(matrix, labels, keep, step, c)
    eliminated = {f: r + 1 for r, dropped in enumerate(rounds) for f in dropped}
    return pd.DataFrame({
        "feature": list(feature_names),
        "f_score": scores,
        "f_rank": ranks,
        "rfe_round": [eliminated.get(i, 0) for i in range(scores.size)],
    })
