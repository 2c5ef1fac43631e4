"""Label-flipping poisoning of a training partition.

Level 1 flips a random fraction of all training labels, either inverting them
or redrawing them uniformly. Level 2 targets malign rows that carry a nonzero
(above-threshold) value on attacker-chosen features and relabels them benign.
Features are never modified.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dataset import BENIGN, MALIGN, LabeledDataset
from .explain import DEFAULT_PARETO_MASS, gini_importance, pareto_top
from .models import ForestParams, ModelKind, train

INVERT = "invert"
UNIFORM_RANDOM = "uniform_random"
LEVEL1_MODES = (INVERT, UNIFORM_RANDOM)
AUTO = "auto"


class AttackError(ValueError):
    pass


def flip_budget(ratio: float, n: int) -> int:
    """floor(ratio * n), robust to binary representation of the ratio."""
    if not 0 <= ratio <= 1:
        raise AttackError(f"ratio must lie in [0, 1], got {ratio}")
    return min(n, math.floor(ratio * n + 1e-9))


@dataclass(frozen=True)
class AttackSpec:
    level: int
    ratio: float = 0.0
    mode: str | None = None
    targeting: str | tuple[str, ...] = AUTO
    threshold: float = 0.0
    seed: int = 0
    pareto_mass: float = DEFAULT_PARETO_MASS

    def __post_init__(self):
        if self.level not in (1, 2):
            raise AttackError(f"attack level must be 1 or 2, got {self.level!r}")
        if not 0 <= self.ratio <= 1:
            raise AttackError(f"ratio must lie in [0, 1], got {self.ratio}")
        if self.level == 1:
            mode = self.mode or UNIFORM_RANDOM
            if mode not in LEVEL1_MODES:
                raise AttackError(f"level-1 mode must be one of {LEVEL1_MODES}, got {mode!r}")
            object.__setattr__(self, "mode", mode)
        elif self.mode is not None:
            raise AttackError("level-2 attacks take no mode")
        if self.level == 2 and not isinstance(self.targeting, str):
            object.__setattr__(self, "targeting", tuple(self.targeting))
        elif self.level == 2 and self.targeting != AUTO:
            raise AttackError(f"targeting must be 'auto' or a feature list, got {self.targeting!r}")

    @property
    def label(self) -> str:
        """Short stable name, e.g. ``L1-invert`` or ``L2-auto``."""
        if self.level == 1:
            return f"L1-{self.mode}"
        return "L2-auto" if self.targeting == AUTO else "L2-explicit"

    def to_dict(self) -> dict:
        out = {"level": self.level, "ratio": self.ratio, "seed": self.seed}
        if self.level == 1:
            out["mode"] = self.mode
        else:
            out["targeting"] = self.targeting if self.targeting == AUTO else list(self.targeting)
            out["threshold"] = self.threshold
            out["pareto_mass"] = self.pareto_mass
        return out

    @classmethod
    def from_dict(cls, d: dict) -> AttackSpec:
        d = dict(d)
        if isinstance(d.get("targeting"), list):
            d["targeting"] = tuple(d["targeting"])
        try:
            return cls(**d)
        except TypeError as exc:
            raise AttackError(f"bad attack spec {d}: {exc}") from None


@dataclass(frozen=True)
class FlipLog:
    """Rows whose label actually changed. ``n_selected`` counts rows the attack
    picked, which exceeds ``len(self)`` when a redraw kept the old label."""

    flipped_indices: tuple[int, ...] = ()
    old_labels: tuple[int, ...] = ()
    new_labels: tuple[int, ...] = ()
    n_selected: int = 0
    features: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if not len(self.flipped_indices) == len(self.old_labels) == len(self.new_labels):
            raise AttackError("flip log lists differ in length")
        if any(a >= b for a, b in zip(self.flipped_indices, self.flipped_indices[1:])):
            raise AttackError("flip log indices must be strictly increasing")

    def __len__(self):
        return len(self.flipped_indices)

    @property
    def n_changed(self) -> int:
        return len(self.flipped_indices)

    def to_dict(self) -> dict:
        return {
            "flipped_indices": list(self.flipped_indices),
            "old_labels": list(self.old_labels),
            "new_labels": list(self.new_labels),
            "n_selected": self.n_selected,
            "n_changed": self.n_changed,
            "features": list(self.features),
        }


def _apply(train: LabeledDataset, selected: np.ndarray, new: np.ndarray, features=()):
    old = train.labels
    labels = old.copy()
    labels[selected] = new
    changed = np.flatnonzero(labels != old)
    log = FlipLog(
        tuple(changed.tolist()),
        tuple(old[changed].tolist()),
        tuple(labels[changed].tolist()),
        n_selected=len(selected),
        features=tuple(features),
    )
    return train.with_labels(labels), log


def flip_random(
    train: LabeledDataset, ratio: float, mode: str = UNIFORM_RANDOM, seed: int = 0
) -> tuple[LabeledDataset, FlipLog]:
    """Select floor(ratio * N) rows uniformly without replacement and flip them.

    The selection is a prefix of one seeded permutation, so for a fixed seed the
    rows poisoned at a lower ratio are a subset of those at a higher ratio.
    """
    if mode not in LEVEL1_MODES:
        raise AttackError(f"unknown level-1 mode {mode!r}")
    n = len(train)
    m = flip_budget(ratio, n)
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    redraw = rng.integers(0, 2, size=n)
    selected = order[:m]
    if mode == INVERT:
        new = 1 - train.labels[selected]
    else:
        new = redraw[:m]
    return _apply(train, selected, new)


def _feature_columns(train: LabeledDataset, features: Sequence[str]) -> list[int]:
    index = {name: j for j, name in enumerate(train.feature_names)}
    missing = [f for f in features if f not in index]
    if missing:
        raise AttackError(f"unknown feature(s): {missing}")
    return [index[f] for f in features]


def eligible_targets(
    train: LabeledDataset, features: Sequence[str], threshold: float = 0.0
) -> np.ndarray:
    """Sorted indices of malign rows where any named feature exceeds ``threshold``."""
    cols = _feature_columns(train, features)
    if not cols:
        return np.zeros(0, dtype=np.int64)
    hot = (train.rows[:, cols] > threshold).any(axis=1)
    return np.flatnonzero(hot & (train.labels == MALIGN))


def flip_targeted(
    train: LabeledDataset,
    ratio: float,
    features: Sequence[str],
    threshold: float = 0.0,
    seed: int = 0,
) -> tuple[LabeledDataset, FlipLog]:
    """Relabel floor(ratio * |E|) randomly chosen eligible rows as benign."""
    eligible = eligible_targets(train, features, threshold)
    m = flip_budget(ratio, len(eligible))
    rng = np.random.default_rng(seed)
    selected = np.sort(eligible[rng.permutation(len(eligible))[:m]])
    return _apply(train, selected, np.full(m, BENIGN), features)


def auto_target_features(
    train: LabeledDataset,
    cumulative_mass: float = DEFAULT_PARETO_MASS,
    seed: int = 0,
    forest: ForestParams | None = None,
) -> list[str]:
    """Features an attacker would target: the Pareto head of a clean forest's
    impurity ranking."""
    model = train_explainer(train, seed, forest)
    return pareto_top(gini_importance(model), cumulative_mass)


def train_explainer(train_data: LabeledDataset, seed: int = 0, forest: ForestParams | None = None):
    return train(ModelKind.RANDOM_FOREST, forest or ForestParams(), train_data, seed)


def apply_attack(
    train: LabeledDataset, spec: AttackSpec, features: Sequence[str] | None = None
) -> tuple[LabeledDataset, FlipLog]:
    """Run ``spec`` on ``train``. Level-2 ``auto`` specs need ``features``
    (from :func:`auto_target_features`) unless the caller wants them derived
    here with the spec's seed."""
    if spec.level == 1:
        return flip_random(train, spec.ratio, spec.mode, spec.seed)
    if spec.targeting != AUTO:
        features = spec.targeting
    elif features is None:
        features = auto_target_features(train, spec.pareto_mass, spec.seed)
    return flip_targeted(train, spec.ratio, features, spec.threshold, spec.seed)
