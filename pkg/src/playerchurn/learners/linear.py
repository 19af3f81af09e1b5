"""L1-penalized logistic regression and linear SVM"""
import logging
import warnings
from typing import Union

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin

from ..errors import ConvergenceWarning
from .preprocessing import check_labels, check_matrix

logger = logging.getLogger(__name__)


def logistic(eta: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """1 / (1 + exp(-eta))"""
    if np.ndim(eta) == 0:
        if not np.isfinite(eta):
            raise ValueError("eta must be finite")
        return float(expit(eta))
    return expit(np.asarray(eta, dtype=np.float64))


def _soft_threshold(z: float, threshold: float) -> float:
    if z > threshold:
        return z - threshold
    if z < -threshold:
        return z + threshold
    return 0.0


class LinearModel(BaseEstimator, ClassifierMixin):
    """Shared surface for fitted linear classifiers: weights, intercept, decision scores"""
    kind: str = "linear"

    @property
    def weights(self) -> np.ndarray:
        return self.coef_

    @property
    def intercept(self) -> float:
        return float(self.intercept_)

    def decision_function(self, X) -> np.ndarray:
        X = check_matrix(X)
        return X @ self.coef_ + self.intercept_

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(X) > 0).astype(np.int64)

    def _set_solution(self, coef: np.ndarray, intercept: float, n_iter: int):
        if not (np.all(np.isfinite(coef)) and np.isfinite(intercept)):
            raise ArithmeticError(f"{self.kind} fit diverged")
        self.coef_ = coef
        self.intercept_ = float(intercept)
        self.n_iter_ = n_iter
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = coef.size


class LogisticL1(LinearModel):
    """
    Minimizes sum log(1 + exp(-y * eta)) + (1/C) * ||beta||_1 with y in {-1, +1}.

    Cyclic coordinate descent; each coordinate takes a soft-thresholded step on
    the quadratic majorizer with curvature 0.25 * sum(x_j^2). The intercept is
    not penalized. Stops when no coefficient moves more than tol in a sweep.
    """
    kind = "logistic"

    def __init__(self, C: float = 25.0, tol: float = 1e-6, max_iter: int = 10_000):
        self.C = C
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y):
        X = check_matrix(X)
        t = check_labels(y, X.shape[0]).astype(np.float64)
        if self.C <= 0:
            raise ValueError("C must be > 0")
        n, p = X.shape
        penalty = 1.0 / self.C

        coef = np.zeros(p)
        intercept = 0.0
        eta = np.zeros(n)
        curvature = 0.25 * np.einsum("ij,ij->j", X, X)
        intercept_curvature = 0.25 * n

        sweeps = 0
        converged = False
        while sweeps < self.max_iter:
            sweeps += 1

            step = np.sum(expit(eta) - t) / intercept_curvature
            intercept -= step
            eta -= step
            max_change = abs(step)

            for j in range(p):
                if curvature[j] == 0:
                    continue
                grad = X[:, j] @ (expit(eta) - t)
                new = _soft_threshold(coef[j] - grad / curvature[j], penalty / curvature[j])
                delta = new - coef[j]
                if delta != 0.0:
                    coef[j] = new
                    eta += delta * X[:, j]
                    max_change = max(max_change, abs(delta))

            if max_change < self.tol:
                converged = True
                break

        if not converged:
            norm = self.subgradient_norm(X, t, coef, intercept, penalty)
            warnings.warn(ConvergenceWarning("L1 logistic fit hit max_iter", norm, sweeps))

        self._set_solution(coef, intercept, sweeps)
        logger.debug(f"L1 logistic: {sweeps} sweeps, {int(np.sum(coef != 0))}/{p} non-zero")
        return self

    @staticmethod
    def subgradient_norm(X: np.ndarray, t: np.ndarray, coef: np.ndarray,
                         intercept: float, penalty: float) -> float:
        """Norm of the minimum-norm subgradient of the penalized loss"""
        residual = expit(X @ coef + intercept) - t
        grad = X.T @ residual
        violation = np.where(
            coef != 0,
            grad + penalty * np.sign(coef),
            np.sign(grad) * np.maximum(np.abs(grad) - penalty, 0.0),
        )
        return float(np.sqrt(np.sum(violation ** 2) + np.sum(residual) ** 2))

    def predict_proba(self, X) -> np.ndarray:
        p = logistic(self.decision_function(X))
        return np.column_stack([1.0 - p, p])


class LinearSVM(LinearModel):
    """
    Minimizes 0.5 * ||beta||^2 + C * sum max(0, 1 - y * (beta . x + b)).

    Full-batch subgradient descent from zero with step 1/t at epoch t; every
    epoch visits the rows in index order, so the fit is deterministic. seed is
    kept for a uniform estimator signature and does not influence the result.
    """
    kind = "svm"

    def __init__(self, C: float = 0.009, max_iter: int = 10_000, seed: int = 0):
        self.C = C
        self.max_iter = max_iter
        self.seed = seed

    def fit(self, X, y):
        X = check_matrix(X)
        signs = 2.0 * check_labels(y, X.shape[0]) - 1.0
        if self.C <= 0:
            raise ValueError("C must be > 0")

        coef = np.zeros(X.shape[1])
        intercept = 0.0
        for epoch in range(1, self.max_iter + 1):
            margins = signs * (X @ coef + intercept)
            violated = margins < 1.0
            pull = signs[violated] @ X[violated]
            step = 1.0 / epoch
            coef = (1.0 - step) * coef + step * self.C * pull
            intercept = intercept + step * self.C * float(np.sum(signs[violated]))

        self._set_solution(coef, intercept, self.max_iter)
        return self

    def objective(self, X, y) -> float:
        signs = 2.0 * check_labels(y, len(X)) - 1.0
        hinge = np.maximum(0.0, 1.0 - signs * self.decision_function(X))
        return float(0.5 * self.coef_ @ self.coef_ + self.C * hinge.sum())


def fit_logistic_l1(matrix, labels, c: float, tol: float = 1e-6, max_iter: int = 10_000) -> LogisticL1:
    return LogisticL1(C=c, tol=tol, max_iter=max_iter).fit(matrix, labels)


def predict_proba(model: LinearModel, row) -> Union[float, np.ndarray]:
    """P(churn) for one row (float) or many rows (vector)"""
    rows = check_matrix(row)
    proba = logistic(rows @ model.coef_ + model.intercept_)
    return float(proba[0]) if np.ndim(row) == 1 else proba


def fit_linear_svm(matrix, labels, c: float, max_iter: int = 10_000, seed: int = 0) -> LinearSVM:
    return LinearSVM(C=c, max_iter=max_iter, seed=seed).fit(matrix, labels)
