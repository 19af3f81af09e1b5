"""Random forest of binary decision trees, grown from seeded generators"""
import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .preprocessing import check_labels, check_matrix

logger = logging.getLogger(__name__)

LEAF = -1


def gini(counts: np.ndarray) -> np.ndarray:
    """Gini impurity per row of class counts"""
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        shares = counts / total[..., None]
        out = 1.0 - np.sum(shares ** 2, axis=-1)
    return np.where(total > 0, out, 0.0)


def entropy(counts: np.ndarray) -> np.ndarray:
    """Shannon entropy in bits per row of class counts"""
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        shares = counts / total[..., None]
        terms = np.where(shares > 0, -shares * np.log2(shares), 0.0)
    return np.where(total > 0, terms.sum(axis=-1), 0.0)


CRITERIA = {"gini": gini, "entropy": entropy}


@dataclass(frozen=True)
class DecisionTree:
    """Flat node arrays; internal nodes send x[feature] <= threshold left"""
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray
    n_samples: np.ndarray

    @property
    def node_count(self) -> int:
        return int(self.feature.size)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row"""
        nodes = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        active = self.feature[nodes] != LEAF
        while np.any(active):
            idx = rows[active]
            cur = nodes[idx]
            go_left = X[idx, self.feature[cur]] <= self.threshold[cur]
            nodes[idx] = np.where(go_left, self.left[cur], self.right[cur])
            active = self.feature[nodes] != LEAF
        return nodes

    def vote(self, X: np.ndarray) -> np.ndarray:
        """Leaf majority label; an evenly split leaf votes 0"""
        leaf_counts = self.counts[self.apply(X)]
        return (leaf_counts[:, 1] > leaf_counts[:, 0]).astype(np.int64)


def _best_split(x: np.ndarray, y: np.ndarray, parent: float, impurity) -> Optional[Tuple[float, float]]:
    """(impurity decrease, threshold) of the best cut on one feature, None if constant"""
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    cuts = np.flatnonzero(xs[:-1] < xs[1:])
    if cuts.size == 0:
        return None
    n = xs.size
    pos_left = np.cumsum(ys)[cuts]
    n_left = cuts + 1
    left = np.column_stack([n_left - pos_left, pos_left])
    right = np.column_stack([(n - n_left) - (ys.sum() - pos_left), ys.sum() - pos_left])
    child = (n_left * impurity(left) + (n - n_left) * impurity(right)) / n
    best = int(np.argmax(parent - child))
    lo, hi = xs[cuts[best]], xs[cuts[best] + 1]
    threshold = (lo + hi) / 2.0
    if threshold >= hi:
        threshold = lo
    return float(parent - child[best]), float(threshold)


def grow_tree(X: np.ndarray, y: np.ndarray, rng: np.random.Generator, criterion: str = "entropy",
              max_features: Optional[int] = None, max_depth: Optional[int] = None,
              min_samples_split: int = 2) -> DecisionTree:
    """
    Grow one tree on (X, y). Every node draws max_features candidate features
    without replacement; nodes that are pure, too small, at max_depth, or have
    no usable cut become leaves.
    """
    impurity = CRITERIA[criterion]
    n_features = X.shape[1]
    k = n_features if max_features is None else max_features

    feature: List[int] = []
    threshold: List[float] = []
    left: List[int] = []
    right: List[int] = []
    counts: List[np.ndarray] = []
    n_samples: List[int] = []

    def new_node(idx: np.ndarray) -> int:
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        positives = int(y[idx].sum())
        counts.append(np.array([idx.size - positives, positives], dtype=np.int64))
        n_samples.append(int(idx.size))
        return len(feature) - 1

    stack = [(new_node(np.arange(X.shape[0])), np.arange(X.shape[0]), 0)]
    while stack:
        node, idx, depth = stack.pop()
        parent = float(impurity(counts[node]))
        if idx.size < min_samples_split or parent == 0.0:
            continue
        if max_depth is not None and depth >= max_depth:
            continue

        best: Optional[Tuple[float, int, float]] = None
        for f in rng.choice(n_features, size=k, replace=False):
            found = _best_split(X[idx, f], y[idx], parent, impurity)
            if found is not None and (best is None or found[0] > best[0]):
                best = (found[0], int(f), found[1])
        if best is None:
            continue

        _, f, cut = best
        goes_left = X[idx, f] <= cut
        left_idx, right_idx = idx[goes_left], idx[~goes_left]
        feature[node] = f
        threshold[node] = cut
        left[node] = new_node(left_idx)
        right[node] = new_node(right_idx)
        # LIFO: the left subtree expands first
        stack.append((right[node], right_idx, depth + 1))
        stack.append((left[node], left_idx, depth + 1))

    return DecisionTree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        counts=np.vstack(counts),
        n_samples=np.asarray(n_samples, dtype=np.int64),
    )


class RandomForest(BaseEstimator, ClassifierMixin):
    """
    Bagged decision trees. Tree i grows from a generator seeded by the i-th
    child of SeedSequence(seed), so the forest does not depend on threads.
    predict_proba is the fraction of trees voting churn.
    """

    def __init__(self, n_estimators: int = 300, criterion: str = "entropy",
                 max_features: Union[int, str, None] = 4, max_depth: Optional[int] = None,
                 min_samples_split: int = 15, bootstrap: bool = True, seed: int = 0,
                 threads: int = 1):
        self.n_estimators = n_estimators
        self.criterion = criterion
        self.max_features = max_features
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.bootstrap = bootstrap
        self.seed = seed
        self.threads = threads

    def _check_params(self, n_features: int) -> int:
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        if self.criterion not in CRITERIA:
            raise ValueError(f"criterion must be one of {sorted(CRITERIA)}")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be >= 1 or None")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")

        if self.max_features is None or self.max_features == "all":
            return n_features
        if self.max_features == "sqrt":
            return max(1, int(np.sqrt(n_features)))
        if isinstance(self.max_features, str) or self.max_features < 1:
            raise ValueError(f"invalid max_features {self.max_features!r}")
        if self.max_features > n_features:
            warnings.warn(f"max_features={self.max_features} clamped to {n_features} features")
            logger.warning(f"max_features={self.max_features} clamped to {n_features}")
            return n_features
        return int(self.max_features)

    def fit(self, X, y):
        X = check_matrix(X)
        y = check_labels(y, X.shape[0])
        max_features = self._check_params(X.shape[1])
        n = X.shape[0]
        children = np.random.SeedSequence(self.seed).spawn(self.n_estimators)

        def build(child: np.random.SeedSequence) -> DecisionTree:
            rng = np.random.default_rng(child)
            sample = rng.integers(0, n, size=n) if self.bootstrap else np.arange(n)
            return grow_tree(X[sample], y[sample], rng, self.criterion, max_features,
                             self.max_depth, self.min_samples_split)

        if self.threads > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as executor:
                self.trees_ = list(executor.map(build, children))
        else:
            self.trees_ = [build(c) for c in children]

        self.max_features_ = max_features
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        logger.debug(f"forest: {self.n_estimators} trees, "
                     f"{sum(t.node_count for t in self.trees_)} nodes")
        return self

    def vote_fraction(self, X) -> np.ndarray:
        X = check_matrix(X)
        votes = np.zeros(X.shape[0])
        for tree in self.trees_:
            votes += tree.vote(X)
        return votes / len(self.trees_)

    def predict_proba(self, X) -> np.ndarray:
        frac = self.vote_fraction(X)
        return np.column_stack([1.0 - frac, frac])

    def predict(self, X) -> np.ndarray:
        return (self.vote_fraction(X) > 0.5).astype(np.int64)


def fit_random_forest(matrix, labels, params: Optional[dict] = None, seed: int = 0,
                      threads: int = 1) -> RandomForest:
    params = {k: v for k, v in (params or {}).items() if k not in ("seed", "threads")}
    return RandomForest(**params, seed=seed, threads=threads).fit(matrix, labels)


def forest_proba(forest: RandomForest, row) -> Union[float, np.ndarray]:
    """Share of trees voting churn for one row (float) or many rows (vector)"""
    frac = forest.vote_fraction(row)
    return float(frac[0]) if np.ndim(row) == 1 else frac
