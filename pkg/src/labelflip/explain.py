"""Attacker-side feature discovery: impurity-based importance rankings from
trees and forests, and the Pareto cut of that ranking."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .models import Classifier, ModelKind

DEFAULT_PARETO_MASS = 0.8
_SUM_TOL = 1e-9


class ExplainError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureImportanceRanking:
    """(feature, importance) pairs, most important first; equal importances
    keep the dataset's column order."""

    entries: tuple[tuple[str, float], ...]

    def __post_init__(self):
        names = [n for n, _ in self.entries]
        if len(set(names)) != len(names):
            raise ExplainError("duplicate feature in ranking")
        values = [v for _, v in self.entries]
        if any(v < 0 or not np.isfinite(v) for v in values):
            raise ExplainError("importances must be finite and nonnegative")
        if any(a < b for a, b in zip(values, values[1:])):
            raise ExplainError("ranking must be sorted by descending importance")
        total = sum(values)
        if total != 0 and abs(total - 1.0) > _SUM_TOL:
            raise ExplainError(f"importances sum to {total}, expected 1")

    @classmethod
    def from_weights(cls, names, weights) -> FeatureImportanceRanking:
        order = sorted(range(len(names)), key=lambda j: (-weights[j], j))
        return cls(tuple((names[j], float(weights[j])) for j in order))

    @property
    def names(self) -> list[str]:
        return [n for n, _ in self.entries]

    @property
    def importances(self) -> np.ndarray:
        return np.array([v for _, v in self.entries])

    def as_dict(self) -> dict[str, float]:
        return dict(self.entries)

    def __len__(self):
        return len(self.entries)


def gini_importance(model: Classifier) -> FeatureImportanceRanking:
    """Normalized total weighted Gini decrease per feature (forest: mean over trees)."""
    if model.kind not in (ModelKind.DECISION_TREE, ModelKind.RANDOM_FOREST):
        raise ExplainError(f"impurity importance is undefined for {model.kind}")
    return FeatureImportanceRanking.from_weights(model.feature_names, model.importance)


def pareto_top(
    ranking: FeatureImportanceRanking, cumulative_mass: float = DEFAULT_PARETO_MASS
) -> list[str]:
    """Shortest head of the ranking whose importances add up to ``cumulative_mass``."""
    if not 0 < cumulative_mass <= 1:
        raise ExplainError("cumulative_mass must lie in (0, 1]")
    values = ranking.importances
    if not values.size or values.sum() == 0:
        raise ExplainError("ranking has no informative features")
    cumulative = np.cumsum(values)
    n_nonzero = int(np.count_nonzero(values))
    reached = np.flatnonzero(cumulative >= cumulative_mass - _SUM_TOL)
    cut = int(reached[0]) + 1 if reached.size else n_nonzero
    return ranking.names[: min(cut, n_nonzero)]


def write_ranking_csv(ranking: FeatureImportanceRanking, path: str | Path) -> None:
    """Columns: feature, importance, cumulative (plot-ready Pareto table)."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["feature", "importance", "cumulative"])
        running = 0.0
        for name, value in ranking.entries:
            running += value
            writer.writerow([name, repr(value), repr(running)])
