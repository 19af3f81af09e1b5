"""Feature standardization fit on training rows only"""
import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin


def check_matrix(rows, name: str = "matrix") -> np.ndarray:
    """2-D finite float array or ValueError"""
    arr = np.asarray(rows, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_labels(labels, n_rows: int) -> np.ndarray:
    """Binary 0/1 int vector of length n_rows or ValueError"""
    y = np.asarray(labels)
    if y.ndim != 1 or y.size != n_rows:
        raise ValueError(f"labels must be a vector of length {n_rows}")
    if not np.all(np.isin(y, (0, 1))):
        raise ValueError("labels must be binary (0/1)")
    return y.astype(np.int64)


class Standardizer(BaseEstimator, TransformerMixin):
    """Per-column (x - mean) / std with population std; constant columns pass through"""

    def fit(self, X, y=None):
        X = check_matrix(X)
        if X.shape[0] < 2:
            raise ValueError("standardizer needs at least 2 rows to fit")
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        constant = std == 0
        # Zero-variance columns are left untouched
        self.mean_ = np.where(constant, 0.0, mean)
        self.scale_ = np.where(constant, 1.0, std)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        X = check_matrix(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        return (X - self.mean_) / self.scale_


def standardize_fit(matrix) -> Standardizer:
    return Standardizer().fit(matrix)


def standardize_apply(standardizer: Standardizer, rows) -> np.ndarray:
    return standardizer.transform(rows)
