"""
Text model files.

Line 1 is a JSON header: {"format": "playerchurn-model", "version": 1,
"kind": ..., "params": ..., "seed": ..., "feature_names": [...]}. Every
following line is one JSON object {"name": ..., "values": ...} holding a
fitted parameter block. Floats are written with repr precision, so a
loaded model reproduces the saved model's predictions exactly.
"""
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Tuple, Union

import numpy as np

from ..errors import DataError
from .clustering import KMeansModel
from .forest import DecisionTree, RandomForest
from .knn import KNeighbors
from .linear import LinearSVM, LogisticL1
from .preprocessing import Standardizer, check_matrix

FORMAT = "playerchurn-model"
VERSION = 1

KINDS = {
    "logistic": LogisticL1,
    "svm": LinearSVM,
    "knn": KNeighbors,
    "rf": RandomForest,
    "kmeans": KMeansModel,
}
KIND_OF = {cls: kind for kind, cls in KINDS.items()}

TREE_FIELDS = ("feature", "threshold", "left", "right", "counts", "n_samples")


@dataclass
class ModelBundle:
    """Fitted estimator plus the standardizer and feature order it was trained with"""
    estimator: Any
    feature_names: List[str]
    standardizer: Optional[Standardizer] = None
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def kind(self) -> str:
        return KIND_OF[type(self.estimator)]

    def prepare(self, raw_rows) -> np.ndarray:
        rows = check_matrix(raw_rows)
        return self.standardizer.transform(rows) if self.standardizer is not None else rows

    def scores(self, raw_rows) -> np.ndarray:
        """Ranking score per row: churn probability, or the SVM decision value"""
        rows = self.prepare(raw_rows)
        if hasattr(self.estimator, "predict_proba"):
            return self.estimator.predict_proba(rows)[:, 1]
        return self.estimator.decision_function(rows)

    def predict_proba(self, raw_rows) -> np.ndarray:
        return self.estimator.predict_proba(self.prepare(raw_rows))

    def predict(self, raw_rows) -> np.ndarray:
        return self.estimator.predict(self.prepare(raw_rows))


def _blocks(bundle: ModelBundle) -> Iterator[Tuple[str, Any]]:
    if bundle.standardizer is not None:
        yield "standardizer.mean", bundle.standardizer.mean_.tolist()
        yield "standardizer.scale", bundle.standardizer.scale_.tolist()

    est = bundle.estimator
    if isinstance(est, (LogisticL1, LinearSVM)):
        yield "coef", est.coef_.tolist()
        yield "intercept", est.intercept_
        yield "n_iter", est.n_iter_
    elif isinstance(est, KNeighbors):
        yield "train", est.train_.tolist()
        yield "labels", est.labels_.tolist()
    elif isinstance(est, RandomForest):
        yield "max_features", est.max_features_
        for i, tree in enumerate(est.trees_):
            yield f"tree.{i}", {name: getattr(tree, name).tolist() for name in TREE_FIELDS}
    elif isinstance(est, KMeansModel):
        yield "centroids", est.centroids_.tolist()
        yield "assignment", est.assignment_.tolist()
        yield "inertia_history", est.inertia_history_
        mapping = est.cluster_to_label_
        yield "cluster_to_label", None if mapping is None else [mapping[c] for c in sorted(mapping)]
    else:
        raise ValueError(f"cannot serialize {type(est).__name__}")


def save_model(bundle: ModelBundle, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(exist_ok=True, parents=True)
    # Worker count never changes a fitted model, so it stays out of the file
    params = {k: v for k, v in bundle.estimator.get_params().items() if k != "threads"}
    header = {
        "format": FORMAT,
        "version": VERSION,
        "kind": bundle.kind,
        "params": params,
        "seed": params.get("seed"),
        "feature_names": list(bundle.feature_names),
        "meta": bundle.meta,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(json.dumps(header, sort_keys=True) + "\n")
        for name, values in _blocks(bundle):
            f.write(json.dumps({"name": name, "values": values}) + "\n")
    return path


def _restore(kind: str, params: Dict[str, Any], blocks: Dict[str, Any]):
    est = KINDS[kind](**params)
    if kind in ("logistic", "svm"):
        coef = np.asarray(blocks["coef"], dtype=np.float64)
        est._set_solution(coef, float(blocks["intercept"]), int(blocks["n_iter"]))
    elif kind == "knn":
        est.fit(np.asarray(blocks["train"], dtype=np.float64), np.asarray(blocks["labels"]))
    elif kind == "rf":
        trees = []
        for i in range(est.n_estimators):
            raw = blocks[f"tree.{i}"]
            trees.append(DecisionTree(
                feature=np.asarray(raw["feature"], dtype=np.int64),
                threshold=np.asarray(raw["threshold"], dtype=np.float64),
                left=np.asarray(raw["left"], dtype=np.int64),
                right=np.asarray(raw["right"], dtype=np.int64),
                counts=np.asarray(raw["counts"], dtype=np.int64).reshape(-1, 2),
                n_samples=np.asarray(raw["n_samples"], dtype=np.int64),
            ))
        est.trees_ = trees
        est.max_features_ = int(blocks["max_features"])
        est.classes_ = np.array([0, 1])
    elif kind == "kmeans":
        est.centroids_ = np.asarray(blocks["centroids"], dtype=np.float64)
        est.assignment_ = np.asarray(blocks["assignment"], dtype=np.int64)
        est.inertia_history_ = [float(v) for v in blocks["inertia_history"]]
        est.inertia_ = est.inertia_history_[-1]
        labels = blocks["cluster_to_label"]
        est.cluster_to_label_ = None if labels is None else {c: int(v) for c, v in enumerate(labels)}
        est.classes_ = np.array([0, 1])
    return est


def load_model(path: Union[str, Path]) -> ModelBundle:
    path = Path(path)
    with open(path, "r", encoding="utf-8") as f:
        lines = [line for line in f.read().split("\n") if line]
    if not lines:
        raise DataError(f"{path}: empty model file")
    try:
        header = json.loads(lines[0])
        blocks = {}
        for line in lines[1:]:
            entry = json.loads(line)
            blocks[entry["name"]] = entry["values"]
    except (json.JSONDecodeError, KeyError) as e:
        raise DataError(f"{path}: malformed model file ({e})") from e

    if header.get("format") != FORMAT:
        raise DataError(f"{path}: not a {FORMAT} file")
    if header.get("version") != VERSION:
        raise DataError(f"{path}: unsupported model version {header.get('version')}")
    kind = header.get("kind")
    if kind not in KINDS:
        raise DataError(f"{path}: unknown model kind {kind!r}")

    estimator = _restore(kind, header["params"], blocks)
    standardizer = None
    if "standardizer.mean" in blocks:
        standardizer = Standardizer()
        standardizer.mean_ = np.asarray(blocks["standardizer.mean"], dtype=np.float64)
        standardizer.scale_ = np.asarray(blocks["standardizer.scale"], dtype=np.float64)
        standardizer.n_features_in_ = standardizer.mean_.size
    n_features = len(header["feature_names"])
    estimator.n_features_in_ = n_features
    return ModelBundle(
        estimator=estimator,
        feature_names=list(header["feature_names"]),
        standardizer=standardizer,
        meta=header.get("meta", {}),
    )
