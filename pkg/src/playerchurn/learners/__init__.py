"""From-scratch learners behind the scikit-learn estimator protocol"""
from typing import Any, Dict, Optional

from .clustering import (
    KMeansModel, PcaModel, components_for_variance, fit_kmeans, fit_pca, kmeans_classify,
    pca_transform,
)
from .forest import RandomForest, fit_random_forest, forest_proba
from .knn import KNeighbors, knn_predict
from .linear import LinearModel, LinearSVM, LogisticL1, fit_linear_svm, fit_logistic_l1, logistic, predict_proba
from .preprocessing import Standardizer, standardize_apply, standardize_fit
from .serialization import ModelBundle, load_model, save_model

# CLI family name -> estimator class
MODEL_FAMILIES = {
    "lr": LogisticL1,
    "svm": LinearSVM,
    "knn": KNeighbors,
    "rf": RandomForest,
    "kmeans": KMeansModel,
}


def make_model(family: str, params: Optional[Dict[str, Any]] = None, seed: int = 0, threads: int = 1):
    """Unfitted estimator for a family; seed/threads are passed only where the family takes them"""
    if family not in MODEL_FAMILIES:
        raise ValueError(f"unknown model family '{family}' (known: {sorted(MODEL_FAMILIES)})")
    cls = MODEL_FAMILIES[family]
    accepted = cls().get_params()
    params = dict(params or {})
    unknown = sorted(set(params) - set(accepted))
    if unknown:
        raise ValueError(f"{family}: unknown parameter(s) {unknown}")
    if "seed" in accepted:
        params.setdefault("seed", seed)
    if "threads" in accepted:
        params.setdefault("threads", threads)
    return cls(**params)


__all__ = [
    "MODEL_FAMILIES", "make_model",
    "KMeansModel", "PcaModel", "components_for_variance", "fit_kmeans", "fit_pca",
    "kmeans_classify", "pca_transform",
    "RandomForest", "fit_random_forest", "forest_proba",
    "KNeighbors", "knn_predict",
    "LinearModel", "LinearSVM", "LogisticL1", "fit_linear_svm", "fit_logistic_l1", "logistic",
    "predict_proba",
    "Standardizer", "standardize_apply", "standardize_fit",
    "ModelBundle", "load_model", "save_model",
]
