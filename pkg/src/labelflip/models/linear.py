"""Linear models on standardized inputs: logistic regression by batch gradient
descent and a linear SVM by hinge-loss subgradient descent."""

from __future__ import annotations

import numpy as np

from .base import (
    Classifier,
    LogisticParams,
    ModelKind,
    Standardizer,
    SvmParams,
    sigmoid,
)


def logistic_loss(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, l2: float) -> float:
    """Mean cross-entropy plus ``l2/2 * ||w||^2`` (bias not penalized)."""
    z = X @ w + b
    return float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * (w @ w))


def logistic_gradient(
    w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, l2: float
) -> tuple[np.ndarray, float]:
    """Analytic gradient of :func:`logistic_loss` with respect to (w, b)."""
    residual = sigmoid(X @ w + b) - y
    n = max(len(y), 1)
    return X.T @ residual / n + l2 * w, float(residual.sum() / n)


class LogisticRegression(Classifier):
    kind = ModelKind.LOGISTIC_REGRESSION

    def fit(self, X: np.ndarray, y: np.ndarray, seed: int = 0) -> LogisticRegression:
        # zero init: gradient descent here uses no randomness, seed is accepted for uniformity
        hp: LogisticParams = self.hyperparameters
        self.standardizer = Standardizer.fit(X)
        Z = self.standardizer.transform(X)
        yf = y.astype(np.float64)
        w = np.zeros(Z.shape[1])
        b = 0.0
        for _ in range(hp.epochs):
            gw, gb = logistic_gradient(w, b, Z, yf, hp.l2_penalty)
            w -= hp.learning_rate * gw
            b -= hp.learning_rate * gb
        self.weights, self.bias = w, b
        return self

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        return self.standardizer.transform(X) @ self.weights + self.bias

    def _scores(self, X):
        return sigmoid(self.decision_function(X))

    def get_params(self):
        return {
            "mean": self.standardizer.mean.tolist(),
            "scale": self.standardizer.scale.tolist(),
            "weights": self.weights.tolist(),
            "bias": self.bias,
        }

    def set_params(self, params):
        self.standardizer = Standardizer(np.array(params["mean"]), np.array(params["scale"]))
        self.weights = np.array(params["weights"], dtype=np.float64)
        self.bias = float(params["bias"])


class LinearSvm(Classifier):
    """Soft-margin linear SVM.

    Minimizes ``lam/2 * ||w||^2 + mean(max(0, 1 - y * (w . x)))`` with full-batch
    subgradient steps of size ``1 / sqrt(t)`` and returns the average iterate.
    The bias is carried as a constant input column. The raw margin is squashed
    through a sigmoid so the score lives in [0, 1]; ranking is unchanged.
    """

    kind = ModelKind.LINEAR_SVM

    def fit(self, X: np.ndarray, y: np.ndarray, seed: int = 0) -> LinearSvm:
        hp: SvmParams = self.hyperparameters
        lam = hp.regularization
        self.standardizer = Standardizer.fit(X)
        Z = np.hstack([self.standardizer.transform(X), np.ones((len(X), 1))])
        signs = np.where(y == 1, 1.0, -1.0)
        w = np.zeros(Z.shape[1])
        w_sum = np.zeros_like(w)
        n = len(y)
        for t in range(1, hp.epochs + 1):
            active = signs * (Z @ w) < 1.0
            subgrad = lam * w - (signs[active] @ Z[active]) / n
            w -= subgrad / np.sqrt(t)
            w_sum += w
        # the last iterate oscillates on noisy labels, the average does not
        w = w_sum / hp.epochs
        self.weights, self.bias = w[:-1], float(w[-1])
        return self

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        return self.standardizer.transform(X) @ self.weights + self.bias

    def _scores(self, X):
        return sigmoid(self.decision_function(X))

    def get_params(self):
        return {
            "mean": self.standardizer.mean.tolist(),
            "scale": self.standardizer.scale.tolist(),
            "weights": self.weights.tolist(),
            "bias": self.bias,
        }

    def set_params(self, params):
        LogisticRegression.set_params(self, params)
