"""Five binary classifiers behind one train / score / predict interface."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..dataset import LabeledDataset
from .base import (
    Classifier,
    ForestParams,
    Hyperparameters,
    KnnParams,
    LogisticParams,
    ModelError,
    ModelKind,
    SvmParams,
    TreeParams,
    default_hyperparameters,
    hyperparameters_from_dict,
    sigmoid,
)
from .knn import KNearestNeighbors
from .linear import LinearSvm, LogisticRegression, logistic_gradient, logistic_loss
from .tree import DecisionTree, RandomForest, TreeStructure, best_split, grow_tree

TrainedModel = Classifier

MODEL_CLASSES: dict[ModelKind, type[Classifier]] = {
    cls.kind: cls
    for cls in (LogisticRegression, DecisionTree, RandomForest, KNearestNeighbors, LinearSvm)
}

FORMAT_NAME = "labelflip-model"
FORMAT_VERSION = 1


def train(
    kind: ModelKind | str,
    hp: Hyperparameters | dict | None,
    data: LabeledDataset,
    seed: int = 0,
) -> Classifier:
    """Fit a fresh model of ``kind`` on ``data``.

    Single-class training data is accepted by every kind; the fit then scores
    (close to) that class everywhere.
    """
    kind = ModelKind.parse(kind)
    if hp is None or isinstance(hp, dict):
        hp = hyperparameters_from_dict(kind, hp)
    if not isinstance(hp, type(default_hyperparameters(kind))):
        raise ModelError(f"{type(hp).__name__} does not configure {kind}")
    if len(data) == 0:
        raise ModelError("cannot train on an empty dataset")
    if seed < 0:
        raise ModelError("seed must be nonnegative")
    model = MODEL_CLASSES[kind](hp, data.feature_names)
    return model.fit(np.asarray(data.rows), np.asarray(data.labels), seed=seed)


def score(model: Classifier, row) -> float:
    return model.score(row)


def predict_batch(model: Classifier, data: LabeledDataset) -> tuple[np.ndarray, np.ndarray]:
    """(labels, scores) for every row of ``data``, in order."""
    if data.n_features != model.n_features:
        raise ModelError(
            f"dataset has {data.n_features} features, model expects {model.n_features}"
        )
    scores = model.scores(data.rows)
    return (scores >= 0.5).astype(np.int64), scores


def model_to_dict(model: Classifier) -> dict:
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "kind": model.kind.value,
        "hyperparameters": model.hyperparameters_dict(),
        "feature_names": list(model.feature_names),
        "params": model.get_params(),
    }


def model_from_dict(doc: dict) -> Classifier:
    if doc.get("format") != FORMAT_NAME:
        raise ModelError("not a serialized labelflip model")
    if doc.get("version") != FORMAT_VERSION:
        raise ModelError(f"unsupported model format version {doc.get('version')!r}")
    kind = ModelKind.parse(doc["kind"])
    model = MODEL_CLASSES[kind](
        hyperparameters_from_dict(kind, doc["hyperparameters"]), doc["feature_names"]
    )
    model.set_params(doc["params"])
    return model


def save_model(model: Classifier, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model)), encoding="utf-8")


def load_model(path: str | Path) -> Classifier:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


__all__ = [
    "Classifier", "TrainedModel", "ModelKind", "ModelError", "Hyperparameters",
    "LogisticParams", "TreeParams", "ForestParams", "KnnParams", "SvmParams",
    "LogisticRegression", "DecisionTree", "RandomForest", "KNearestNeighbors",
    "LinearSvm", "TreeStructure", "best_split", "grow_tree", "sigmoid",
    "logistic_loss", "logistic_gradient", "default_hyperparameters",
    "hyperparameters_from_dict", "train", "score", "predict_batch",
    "model_to_dict", "model_from_dict", "save_model", "load_model",
]
