"""CART decision trees (Gini impurity) and a bagged random forest."""

from __future__ import annotations

import numpy as np

from .base import Classifier, ForestParams, ModelKind, TreeParams

LEAF = -1


class TreeStructure:
    """Flat array representation of a fitted binary tree.

    Rows go left when ``x[feature] <= threshold``. ``value`` holds the malign
    fraction of the training rows that reached each node.
    """

    __slots__ = ("feature", "threshold", "left", "right", "value", "n_samples", "impurity")

    def __init__(self, feature, threshold, left, right, value, n_samples, impurity):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=np.float64)
        self.n_samples = np.asarray(n_samples, dtype=np.int64)
        self.impurity = np.asarray(impurity, dtype=np.float64)

    @property
    def node_count(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        depth = np.zeros(self.node_count, dtype=np.int64)
        for i in range(self.node_count):
            if self.feature[i] != LEAF:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row."""
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        while True:
            f = self.feature[node]
            inner = f != LEAF
            if not inner.any():
                return node
            r, n, f = rows[inner], node[inner], f[inner]
            go_left = X[r, f] <= self.threshold[n]
            node[inner] = np.where(go_left, self.left[n], self.right[n])

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def impurity_importance(self, n_features: int) -> np.ndarray:
        """Unnormalized weighted Gini decrease summed per feature."""
        out = np.zeros(n_features)
        total = self.n_samples[0]
        for i in np.flatnonzero(self.feature != LEAF):
            l, r = self.left[i], self.right[i]
            decrease = (
                self.n_samples[i] * self.impurity[i]
                - self.n_samples[l] * self.impurity[l]
                - self.n_samples[r] * self.impurity[r]
            ) / total
            out[self.feature[i]] += max(decrease, 0.0)
        return out

    def to_dict(self) -> dict:
        return {name: getattr(self, name).tolist() for name in self.__slots__}

    @classmethod
    def from_dict(cls, d: dict) -> TreeStructure:
        return cls(**{name: d[name] for name in cls.__slots__})


def gini(n_pos, n):
    return 2.0 * n_pos * (n - n_pos) / (n * n)


def best_split(X: np.ndarray, y: np.ndarray, features: np.ndarray, min_leaf: int):
    """Lowest weighted-Gini threshold split over ``features`` (sorted ascending).

    Returns ``(feature, threshold, weighted_child_impurity)`` or None when no
    split leaves ``min_leaf`` rows on both sides. Ties go to the lower feature
    index, then the lower threshold.
    """
    n = len(y)
    if n < 2 * min_leaf:
        return None
    block = X[:, features]
    order = np.argsort(block, axis=0, kind="stable")
    values = np.take_along_axis(block, order, axis=0)
    left_pos = np.cumsum(y[order], axis=0)[:-1].astype(np.float64)
    n_left = np.arange(1, n, dtype=np.float64)[:, None]
    n_right = n - n_left
    right_pos = y.sum() - left_pos
    # n_left * gini_left + n_right * gini_right
    child = 2.0 * (left_pos * (n_left - left_pos) / n_left
                   + right_pos * (n_right - right_pos) / n_right)
    valid = values[1:] > values[:-1]
    valid[: min_leaf - 1] = False
    if min_leaf > 1:
        valid[n - min_leaf :] = False
    if not valid.any():
        return None
    child = np.where(valid, child, np.inf)
    # feature-major flattening makes argmin pick the lowest feature on ties
    flat = int(np.argmin(child.T))
    j, i = divmod(flat, n - 1)
    lo, hi = values[i, j], values[i + 1, j]
    threshold = lo + (hi - lo) / 2.0
    if not lo <= threshold < hi:
        threshold = lo
    return int(features[j]), float(threshold), float(child[i, j] / n)


def grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    max_depth: int | None,
    min_samples_leaf: int,
    features_per_split: int | None = None,
    rng: np.random.Generator | None = None,
) -> TreeStructure:
    """Grow a CART tree. With ``features_per_split`` set, each node draws that
    many candidate features uniformly without replacement from ``rng``."""
    n_features = X.shape[1]
    all_features = np.arange(n_features)
    feature, threshold, left, right, value, n_samples, impurity = ([] for _ in range(7))

    def new_node(idx):
        pos = int(y[idx].sum())
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(pos / len(idx) if len(idx) else 0.0)
        n_samples.append(len(idx))
        impurity.append(gini(pos, len(idx)) if len(idx) else 0.0)
        return len(feature) - 1

    stack = [(new_node(np.arange(len(y))), np.arange(len(y)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        if impurity[node] == 0.0 or (max_depth is not None and depth >= max_depth):
            continue
        if features_per_split is None or rng is None:
            candidates = all_features
        else:
            candidates = np.sort(rng.choice(n_features, size=features_per_split, replace=False))
        found = best_split(X[idx], y[idx], candidates, min_samples_leaf)
        if found is None:
            continue
        f, t, _ = found
        go_left = X[idx, f] <= t
        li, ri = idx[go_left], idx[~go_left]
        feature[node], threshold[node] = f, t
        left[node] = new_node(li)
        right[node] = new_node(ri)
        # right pushed first so the left subtree is numbered first
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))

    return TreeStructure(feature, threshold, left, right, value, n_samples, impurity)


def _normalized(weights: np.ndarray) -> np.ndarray:
    total = weights.sum()
    return weights / total if total > 0 else np.zeros_like(weights)


class DecisionTree(Classifier):
    kind = ModelKind.DECISION_TREE

    def fit(self, X: np.ndarray, y: np.ndarray, seed: int = 0) -> DecisionTree:
        # every feature is a candidate at every node, so the seed is unused
        hp: TreeParams = self.hyperparameters
        self.tree = grow_tree(X, y.astype(np.int64), hp.max_depth, hp.min_samples_leaf)
        self.importance = _normalized(self.tree.impurity_importance(self.n_features))
        return self

    def _scores(self, X):
        return self.tree.predict_value(X)

    def get_params(self):
        return {"tree": self.tree.to_dict()}

    def set_params(self, params):
        self.tree = TreeStructure.from_dict(params["tree"])
        self.importance = _normalized(self.tree.impurity_importance(self.n_features))


class RandomForest(Classifier):
    """Bagged CART trees with per-node feature subsampling.

    Tree ``i`` draws its bootstrap sample and feature subsets from the i-th
    child of ``SeedSequence(seed)``, so trees are independent of build order.
    """

    kind = ModelKind.RANDOM_FOREST

    def fit(self, X: np.ndarray, y: np.ndarray, seed: int = 0) -> RandomForest:
        hp: ForestParams = self.hyperparameters
        k = hp.resolved_features(X.shape[1])
        y = y.astype(np.int64)
        n = len(y)
        self.trees = []
        for child in np.random.SeedSequence(seed).spawn(hp.n_trees):
            rng = np.random.default_rng(child)
            idx = rng.integers(0, n, size=n) if hp.bootstrap else np.arange(n)
            self.trees.append(
                grow_tree(X[idx], y[idx], hp.max_depth, hp.min_samples_leaf, k, rng)
            )
        self.importance = self._importance()
        return self

    def _importance(self) -> np.ndarray:
        per_tree = [_normalized(t.impurity_importance(self.n_features)) for t in self.trees]
        return _normalized(np.mean(per_tree, axis=0))

    def _scores(self, X):
        total = np.zeros(len(X))
        for tree in self.trees:
            total += tree.predict_value(X)
        return total / len(self.trees)

    def get_params(self):
        return {"trees": [t.to_dict() for t in self.trees]}

    def set_params(self, params):
        self.trees = [TreeStructure.from_dict(t) for t in params["trees"]]
        self.importance = self._importance()
