"""k-means classification baseline and principal component analysis"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin

from ..models import FeatureMatrix
from .preprocessing import check_labels, check_matrix

logger = logging.getLogger(__name__)


def _sq_distances(X: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    return ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)


def _plus_plus(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: each new centre drawn with probability proportional to D^2"""
    n = X.shape[0]
    centres = [X[rng.integers(n)]]
    closest = ((X - centres[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = closest.sum()
        pick = rng.integers(n) if total <= 0 else rng.choice(n, p=closest / total)
        centres.append(X[pick])
        closest = np.minimum(closest, ((X - X[pick]) ** 2).sum(axis=1))
    return np.array(centres)


def lloyd(X: np.ndarray, k: int, rng: np.random.Generator,
          max_iter: int = 300) -> Tuple[np.ndarray, np.ndarray, List[float]]:
    """One k-means run: (centroids, assignment, inertia after every assignment step)"""
    centroids = _plus_plus(X, k, rng)
    assignment: Optional[np.ndarray] = None
    history: List[float] = []
    for _ in range(max_iter):
        dist = _sq_distances(X, centroids)
        new_assignment = np.argmin(dist, axis=1)
        history.append(float(dist[np.arange(X.shape[0]), new_assignment].sum()))
        if assignment is not None and np.array_equal(new_assignment, assignment):
            break
        assignment = new_assignment

        point_cost = dist[np.arange(X.shape[0]), assignment]
        for c in range(k):
            members = assignment == c
            if members.any():
                centroids[c] = X[members].mean(axis=0)
            else:
                # Empty cluster restarts at the point worst served by its centroid
                far = int(np.argmax(point_cost))
                centroids[c] = X[far]
                point_cost[far] = 0.0
    else:
        dist = _sq_distances(X, centroids)
        new_assignment = np.argmin(dist, axis=1)
        history.append(float(dist[np.arange(X.shape[0]), new_assignment].sum()))
    return centroids, new_assignment, history


class KMeansModel(BaseEstimator, ClassifierMixin):
    """
    k-means used as a classifier: every cluster takes the majority training label
    of its members (ties and empty clusters map to 0).
    """

    def __init__(self, n_clusters: int = 2, n_init: int = 10, max_iter: int = 300,
                 seed: int = 0, threads: int = 1):
        self.n_clusters = n_clusters
        self.n_init = n_init
        self.max_iter = max_iter
        self.seed = seed
        self.threads = threads

    def fit(self, X, y=None):
        X = check_matrix(X)
        if self.n_clusters <= 0:
            raise ValueError("k must be > 0")
        if self.n_clusters > X.shape[0]:
            raise ValueError(f"k={self.n_clusters} exceeds {X.shape[0]} rows")
        if self.n_init < 1:
            raise ValueError("n_init must be >= 1")

        children = np.random.SeedSequence(self.seed).spawn(self.n_init)

        def run(child):
            return lloyd(X, self.n_clusters, np.random.default_rng(child), self.max_iter)

        if self.threads > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as executor:
                runs = list(executor.map(run, children))
        else:
            runs = [run(c) for c in children]

        # Lowest inertia wins; earlier restart on ties
        best = min(range(len(runs)), key=lambda i: (runs[i][2][-1], i))
        self.centroids_, self.assignment_, self.inertia_history_ = runs[best]
        self.inertia_ = self.inertia_history_[-1]
        self.n_features_in_ = X.shape[1]
        self.classes_ = np.array([0, 1])

        self.cluster_to_label_: Optional[Dict[int, int]] = None
        if y is not None:
            y = check_labels(y, X.shape[0])
            mapping = {}
            for c in range(self.n_clusters):
                members = y[self.assignment_ == c]
                mapping[c] = int(2 * members.sum() > members.size) if members.size else 0
            self.cluster_to_label_ = mapping
        return self

    @property
    def centroids(self) -> np.ndarray:
        return self.centroids_

    @property
    def inertia(self) -> float:
        return self.inertia_

    @property
    def cluster_to_label(self) -> Optional[Dict[int, int]]:
        return self.cluster_to_label_

    def cluster(self, X) -> np.ndarray:
        return np.argmin(_sq_distances(check_matrix(X), self.centroids_), axis=1)

    def predict(self, X) -> np.ndarray:
        if self.cluster_to_label_ is None:
            raise ValueError("k-means model was fit without labels; no cluster-to-label map")
        lookup = np.array([self.cluster_to_label_[c] for c in range(self.n_clusters)], dtype=np.int64)
        return lookup[self.cluster(X)]


def fit_kmeans(matrix: Union[FeatureMatrix, np.ndarray], k: int, seed: int = 0,
               labels: Optional[np.ndarray] = None, n_init: int = 10, threads: int = 1) -> KMeansModel:
    """Fit k-means; labels default to the FeatureMatrix's own churn labels"""
    if isinstance(matrix, FeatureMatrix):
        labels = matrix.labels if labels is None else labels
        matrix = matrix.rows
    return KMeansModel(n_clusters=k, n_init=n_init, seed=seed, threads=threads).fit(matrix, labels)


def kmeans_classify(model: KMeansModel, row) -> Union[int, np.ndarray]:
    labels = model.predict(row)
    return int(labels[0]) if np.ndim(row) == 1 else labels


class PcaModel(BaseEstimator, TransformerMixin):
    """
    Principal components from the eigen-decomposition of the sample covariance.
    Each component is signed so its largest-magnitude entry is positive.
    """

    def __init__(self, n_components: Optional[int] = None):
        self.n_components = n_components

    def fit(self, X, y=None):
        X = check_matrix(X)
        n, p = X.shape
        if n < 2:
            raise ValueError("PCA needs at least 2 rows")
        limit = min(n - 1, p)
        n_components = limit if self.n_components is None else self.n_components
        if not 1 <= n_components <= limit:
            raise ValueError(f"n_components={n_components} outside 1..{limit}")

        self.mean_ = X.mean(axis=0)
        centred = X - self.mean_
        covariance = centred.T @ centred / (n - 1)
        eigenvalues, eigenvectors = np.linalg.eigh(covariance)
        order = np.argsort(eigenvalues, kind="stable")[::-1]
        eigenvalues = np.clip(eigenvalues[order], 0.0, None)
        eigenvectors = eigenvectors[:, order].T

        pivots = np.argmax(np.abs(eigenvectors), axis=1)
        signs = np.sign(eigenvectors[np.arange(p), pivots])
        eigenvectors = eigenvectors * np.where(signs == 0, 1.0, signs)[:, None]

        total = float(np.trace(covariance))
        self.components_ = eigenvectors[:n_components]
        self.explained_variance_ = eigenvalues[:n_components]
        self.explained_variance_ratio_ = (
            eigenvalues[:n_components] / total if total > 0 else np.zeros(n_components)
        )
        self.n_features_in_ = p
        return self

    @property
    def mean(self) -> np.ndarray:
        return self.mean_

    @property
    def components(self) -> np.ndarray:
        return self.components_

    @property
    def explained_variance_ratio(self) -> np.ndarray:
        return self.explained_variance_ratio_

    def transform(self, X) -> np.ndarray:
        return (check_matrix(X) - self.mean_) @ self.components_.T

    def inverse_transform(self, Z) -> np.ndarray:
        return np.asarray(Z, dtype=np.float64) @ self.components_ + self.mean_


def fit_pca(matrix, n_components: int) -> PcaModel:
    return PcaModel(n_components=n_components).fit(matrix)


def pca_transform(model: PcaModel, rows) -> np.ndarray:
    return model.transform(rows)


def components_for_variance(model_or_matrix: Union[PcaModel, np.ndarray], threshold: float = 0.85) -> int:
    """Smallest component count whose cumulative explained variance reaches threshold"""
    if not 0 < threshold <= 1:
        raise ValueError("threshold must be in (0, 1]")
    model = model_or_matrix if isinstance(model_or_matrix, PcaModel) else PcaModel().fit(model_or_matrix)
    cumulative = np.cumsum(model.explained_variance_ratio_)
    reached = np.flatnonzero(cumulative >= threshold - 1e-12)
    if reached.size == 0:
        raise ValueError(f"{model.components_.shape[0]} components explain only {cumulative[-1]:.4f}")
    return int(reached[0] + 1)


def variance_table(matrix, thresholds=(0.85, 0.95)) -> List[Dict[str, float]]:
    """Per-component ratios plus the component counts each threshold needs"""
    model = PcaModel().fit(matrix)
    cumulative = np.cumsum(model.explained_variance_ratio_)
    rows = [
        {"component": i + 1, "explained_variance_ratio": float(r), "cumulative": float(c)}
        for i, (r, c) in enumerate(zip(model.explained_variance_ratio_, cumulative))
    ]
    needed = {t: components_for_variance(model, t) for t in thresholds}
    for row in rows:
        row.update({f"needed_for_{t:g}": needed[t] for t in thresholds})
    return rows
