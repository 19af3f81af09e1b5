"""Confusion counts, ROC curves and AUC"""
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd


def _binary(values, name: str) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a vector")
    if not np.all(np.isin(arr, (0, 1))):
        raise ValueError(f"{name} must be binary (0/1)")
    return arr.astype(np.int64)


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def tpr(self) -> Optional[float]:
        """Recall; None when there are no positives"""
        positives = self.tp + self.fn
        return self.tp / positives if positives else None

    @property
    def fpr(self) -> Optional[float]:
        """None when there are no negatives"""
        negatives = self.fp + self.tn
        return self.fp / negatives if negatives else None

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.total if self.total else 0.0


def confusion(labels, predictions) -> ConfusionMatrix:
    y = _binary(labels, "labels")
    p = _binary(predictions, "predictions")
    if y.size != p.size:
        raise ValueError(f"labels ({y.size}) and predictions ({p.size}) differ in length")
    return ConfusionMatrix(
        tp=int(np.sum((y == 1) & (p == 1))),
        fp=int(np.sum((y == 0) & (p == 1))),
        tn=int(np.sum((y == 0) & (p == 0))),
        fn=int(np.sum((y == 1) & (p == 0))),
    )


@dataclass(frozen=True)
class RocCurve:
    """Points from (0,0) to (1,1); thresholds[0] is +inf"""
    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"threshold": self.thresholds, "fpr": self.fpr, "tpr": self.tpr})


def roc_auc(labels, scores) -> RocCurve:
    """
    ROC over every distinct score; trapezoidal AUC, which equals
    P(score+ > score-) + 0.5 * P(tie).
    """
    y = _binary(labels, "labels")
    s = np.asarray(scores, dtype=np.float64)
    if s.shape != y.shape:
        raise ValueError("labels and scores differ in length")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    positives = int(y.sum())
    negatives = int(y.size - positives)
    if positives == 0 or negatives == 0:
        raise ValueError("roc_auc needs at least one positive and one negative label")

    order = np.argsort(-s, kind="stable")
    s_sorted, y_sorted = s[order], y[order]
    # Last index of every run of equal scores
    ends = np.flatnonzero(np.r_[s_sorted[1:] != s_sorted[:-1], True])
    tp = np.r_[0, np.cumsum(y_sorted)[ends]]
    fp = np.r_[0, (ends + 1) - tp[1:]]

    # Integer trapezoids, one division at the end
    doubled_area = int(np.sum((fp[1:] - fp[:-1]) * (tp[1:] + tp[:-1])))
    auc = doubled_area / (2.0 * positives * negatives)

    return RocCurve(
        thresholds=np.r_[np.inf, s_sorted[ends]],
        fpr=fp / negatives,
        tpr=tp / positives,
        auc=float(auc),
    )


def accuracy_at(labels, scores, threshold: float = 0.5) -> float:
    predictions = (np.asarray(scores, dtype=np.float64) >= threshold).astype(np.int64)
    return confusion(labels, predictions).accuracy
