"""Exact brute-force k-nearest-neighbours under a Minkowski-p metric"""
from concurrent.futures import ThreadPoolExecutor
from typing import Tuple

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .preprocessing import check_labels, check_matrix

QUERY_BLOCK = 256


def _distances(train: np.ndarray, queries: np.ndarray, p: float) -> np.ndarray:
    """Monotone Minkowski-p distance (no final root; ranking is unchanged)"""
    total = np.zeros((queries.shape[0], train.shape[0]))
    for f in range(train.shape[1]):
        diff = np.abs(queries[:, f, None] - train[None, :, f])
        if np.isinf(p):
            np.maximum(total, diff, out=total)
        elif p == 1:
            total += diff
        else:
            total += diff ** p
    return total


def _nearest(dist_row: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k smallest distances; equal distances keep the lower index first"""
    if k == dist_row.size:
        return np.argsort(dist_row, kind="stable")
    kth = np.partition(dist_row, k - 1)[k - 1]
    candidates = np.flatnonzero(dist_row <= kth)
    order = np.argsort(dist_row[candidates], kind="stable")
    return candidates[order][:k]


class KNeighbors(BaseEstimator, ClassifierMixin):
    """
    Majority vote of the k nearest training rows; vote ties go to label 0.

    leaf_size is accepted for config compatibility only: the search is exact
    brute force and builds no spatial index.
    """

    def __init__(self, n_neighbors: int = 24, p: float = 1, leaf_size: int = 2, threads: int = 1):
        self.n_neighbors = n_neighbors
        self.p = p
        self.leaf_size = leaf_size
        self.threads = threads

    def fit(self, X, y):
        X = check_matrix(X)
        y = check_labels(y, X.shape[0])
        if self.n_neighbors <= 0:
            raise ValueError("n_neighbors must be > 0")
        if self.n_neighbors > X.shape[0]:
            raise ValueError(f"n_neighbors={self.n_neighbors} exceeds {X.shape[0]} training rows")
        if self.p < 1:
            raise ValueError("Minkowski p must be >= 1")
        self.train_ = X
        self.labels_ = y
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        return self

    def _block_fraction(self, block: np.ndarray) -> np.ndarray:
        dist = _distances(self.train_, block, float(self.p))
        k = self.n_neighbors
        return np.array([self.labels_[_nearest(row, k)].sum() / k for row in dist])

    def positive_fraction(self, X) -> np.ndarray:
        X = check_matrix(X)
        blocks = [X[i:i + QUERY_BLOCK] for i in range(0, X.shape[0], QUERY_BLOCK)]
        if self.threads > 1 and len(blocks) > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as executor:
                parts = list(executor.map(self._block_fraction, blocks))
        else:
            parts = [self._block_fraction(b) for b in blocks]
        return np.concatenate(parts) if parts else np.zeros(0)

    def predict_proba(self, X) -> np.ndarray:
        frac = self.positive_fraction(X)
        return np.column_stack([1.0 - frac, frac])

    def predict(self, X) -> np.ndarray:
        positives = np.rint(self.positive_fraction(X) * self.n_neighbors)
        return (2 * positives > self.n_neighbors).astype(np.int64)


def knn_predict(train_matrix, train_labels, query, k: int, p: float = 1) -> Tuple[int, float]:
    """(majority label, positive fraction) for one query row"""
    if k <= 0:
        raise ValueError("k must be > 0")
    model = KNeighbors(n_neighbors=k, p=p).fit(train_matrix, train_labels)
    fraction = float(model.positive_fraction(np.asarray(query, dtype=np.float64).reshape(1, -1))[0])
    label = int(2 * round(fraction * k) > k)
    return label, fraction
