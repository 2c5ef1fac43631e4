"""k-nearest-neighbour scoring on standardized inputs."""

from __future__ import annotations

import numpy as np

from .base import Classifier, KnnParams, ModelError, ModelKind, Standardizer

# rough cap on the (queries x train x features) difference block, in elements
_BLOCK_ELEMENTS = 2_000_000


class KNearestNeighbors(Classifier):
    """Score = malign fraction among the k nearest training rows (Euclidean).

    Equal distances are ordered by training index, so the lower index wins.
    """

    kind = ModelKind.KNN

    def fit(self, X: np.ndarray, y: np.ndarray, seed: int = 0) -> KNearestNeighbors:
        hp: KnnParams = self.hyperparameters
        if hp.k > len(y):
            raise ModelError(f"k={hp.k} exceeds the {len(y)} training samples")
        self.standardizer = Standardizer.fit(X)
        self.train_rows = self.standardizer.transform(X)
        self.train_labels = y.astype(np.int64)
        return self

    def neighbors(self, X: np.ndarray) -> np.ndarray:
        """Indices of the k nearest training rows for each row of ``X``."""
        Q = self.standardizer.transform(self._check(X))
        k = self.hyperparameters.k
        n_train, d = self.train_rows.shape
        chunk = max(1, _BLOCK_ELEMENTS // max(1, n_train * d))
        out = np.empty((len(Q), k), dtype=np.int64)
        for start in range(0, len(Q), chunk):
            block = Q[start : start + chunk]
            diff = block[:, None, :] - self.train_rows[None, :, :]
            dist = np.einsum("qnd,qnd->qn", diff, diff)
            out[start : start + chunk] = np.argsort(dist, axis=1, kind="stable")[:, :k]
        return out

    def _scores(self, X):
        return self.train_labels[self.neighbors(X)].mean(axis=1)

    def get_params(self):
        return {
            "mean": self.standardizer.mean.tolist(),
            "scale": self.standardizer.scale.tolist(),
            "train_rows": self.train_rows.tolist(),
            "train_labels": self.train_labels.tolist(),
        }

    def set_params(self, params):
        self.standardizer = Standardizer(np.array(params["mean"]), np.array(params["scale"]))
        self.train_rows = np.array(params["train_rows"], dtype=np.float64).reshape(
            -1, self.n_features
        )
        self.train_labels = np.array(params["train_labels"], dtype=np.int64)
