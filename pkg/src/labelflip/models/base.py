"""Shared pieces of the classifier zoo: kinds, hyperparameters, the common
score/predict surface and input standardization."""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass
from typing import ClassVar

import numpy as np

VARIANCE_FLOOR = 1e-12


class ModelError(ValueError):
    """Invalid hyperparameters, training data or scoring input."""


class ModelKind(str, enum.Enum):
    LOGISTIC_REGRESSION = "LogisticRegression"
    DECISION_TREE = "DecisionTree"
    RANDOM_FOREST = "RandomForest"
    KNN = "Knn"
    LINEAR_SVM = "LinearSvm"

    @classmethod
    def parse(cls, text: str | ModelKind) -> ModelKind:
        if isinstance(text, cls):
            return text
        key = str(text).replace("_", "").replace("-", "").lower()
        for kind in cls:
            if kind.value.lower() == key or kind.name.replace("_", "").lower() == key:
                return kind
        aliases = {"lr": cls.LOGISTIC_REGRESSION, "dt": cls.DECISION_TREE,
                   "tree": cls.DECISION_TREE, "rf": cls.RANDOM_FOREST,
                   "forest": cls.RANDOM_FOREST, "svm": cls.LINEAR_SVM,
                   "knearestneighbors": cls.KNN}
        if key in aliases:
            return aliases[key]
        raise ModelError(f"unknown model kind {text!r}")

    def __str__(self) -> str:
        return self.value


def _positive_int(name, value):
    if int(value) != value or value < 1:
        raise ModelError(f"{name} must be an integer >= 1, got {value!r}")


@dataclass(frozen=True)
class LogisticParams:
    learning_rate: float = 0.1
    epochs: int = 500
    l2_penalty: float = 1e-4

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ModelError("learning_rate must be > 0")
        _positive_int("epochs", self.epochs)
        if self.l2_penalty < 0:
            raise ModelError("l2_penalty must be >= 0")


@dataclass(frozen=True)
class TreeParams:
    max_depth: int | None = 12  # None: grow until pure
    min_samples_leaf: int = 2

    def __post_init__(self):
        if self.max_depth is not None:
            _positive_int("max_depth", self.max_depth)
        _positive_int("min_samples_leaf", self.min_samples_leaf)


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int | None = 12
    min_samples_leaf: int = 2
    features_per_split: int | None = None  # None: round(sqrt(D))
    bootstrap: bool = True

    def __post_init__(self):
        _positive_int("n_trees", self.n_trees)
        if self.max_depth is not None:
            _positive_int("max_depth", self.max_depth)
        _positive_int("min_samples_leaf", self.min_samples_leaf)
        if self.features_per_split is not None:
            _positive_int("features_per_split", self.features_per_split)

    def resolved_features(self, n_features: int) -> int:
        if self.features_per_split is None:
            return max(1, round(math.sqrt(n_features)))
        if self.features_per_split > n_features:
            raise ModelError(
                f"features_per_split={self.features_per_split} exceeds the "
                f"{n_features} available features"
            )
        return self.features_per_split


@dataclass(frozen=True)
class KnnParams:
    k: int = 5
    allow_even_k: bool = False

    def __post_init__(self):
        _positive_int("k", self.k)
        if self.k % 2 == 0 and not self.allow_even_k:
            raise ModelError("k must be odd unless allow_even_k is set")


@dataclass(frozen=True)
class SvmParams:
    regularization: float = 1e-3
    epochs: int = 200

    def __post_init__(self):
        if not self.regularization > 0:
            raise ModelError("regularization must be > 0")
        _positive_int("epochs", self.epochs)


PARAMS_FOR_KIND = {
    ModelKind.LOGISTIC_REGRESSION: LogisticParams,
    ModelKind.DECISION_TREE: TreeParams,
    ModelKind.RANDOM_FOREST: ForestParams,
    ModelKind.KNN: KnnParams,
    ModelKind.LINEAR_SVM: SvmParams,
}

Hyperparameters = LogisticParams | TreeParams | ForestParams | KnnParams | SvmParams


def default_hyperparameters(kind: ModelKind | str) -> Hyperparameters:
    return PARAMS_FOR_KIND[ModelKind.parse(kind)]()


def hyperparameters_from_dict(kind: ModelKind | str, values: dict | None) -> Hyperparameters:
    cls = PARAMS_FOR_KIND[ModelKind.parse(kind)]
    try:
        return cls(**(values or {}))
    except TypeError as exc:
        raise ModelError(f"bad hyperparameters for {ModelKind.parse(kind)}: {exc}") from None


def sigmoid(z: np.ndarray) -> np.ndarray:
    # tanh form: no overflow, exactly 0.5 at 0, and sigmoid(-z) == 1 - sigmoid(z)
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=np.float64)))


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> Standardizer:
        var = X.var(axis=0) if len(X) else np.zeros(X.shape[1])
        return cls(X.mean(axis=0) if len(X) else np.zeros(X.shape[1]),
                   np.sqrt(np.maximum(var, VARIANCE_FLOOR)))

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.scale


class Classifier:
    """Common surface of every trained model.

    ``scores`` gives the malign score in [0, 1]; ``predict`` thresholds it at
    0.5 (a score of exactly 0.5 is malign).
    """

    kind: ClassVar[ModelKind]

    def __init__(self, hyperparameters, feature_names):
        self.hyperparameters = hyperparameters
        self.feature_names = tuple(feature_names)
        self.importance: np.ndarray | None = None

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1) if X.size else X.reshape(0, self.n_features)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ModelError(
                f"{self.kind} expects {self.n_features} features, got shape {X.shape}"
            )
        return X

    def scores(self, X) -> np.ndarray:
        X = self._check(X)
        if len(X) == 0:
            return np.zeros(0)
        return np.clip(self._scores(X), 0.0, 1.0)

    def score(self, row) -> float:
        row = np.asarray(row, dtype=np.float64)
        if row.ndim != 1 or row.shape[0] != self.n_features:
            raise ModelError(
                f"{self.kind} expects a row of {self.n_features} features, got {row.shape}"
            )
        return float(self.scores(row.reshape(1, -1))[0])

    def predict(self, X) -> np.ndarray:
        return (self.scores(X) >= 0.5).astype(np.int64)

    def _scores(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    # serialization hooks
    def get_params(self) -> dict:
        raise NotImplementedError

    def set_params(self, params: dict) -> None:
        raise NotImplementedError

    def hyperparameters_dict(self) -> dict:
        return asdict(self.hyperparameters)
