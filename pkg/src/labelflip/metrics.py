"""Confusion matrices, threshold metrics, ROC curves and AUC with malign (1)
as the positive class."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class MetricSet:
    accuracy: float
    precision: float
    recall: float
    f1: float
    auc: float | None = None
    specificity: float = 0.0  # benign recall, tn / (tn + fp)
    precision_undefined: bool = False
    recall_undefined: bool = False

    def as_dict(self) -> dict:
        return asdict(self)


def _labels(values, name) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise MetricsError(f"{name} must be one-dimensional")
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise MetricsError(f"{name} must contain only 0 and 1")
    return arr.astype(np.int64)


def confusion(predicted: Sequence[int], truth: Sequence[int]) -> ConfusionMatrix:
    p, t = _labels(predicted, "predicted"), _labels(truth, "truth")
    if p.shape != t.shape:
        raise MetricsError(f"length mismatch: {len(p)} predictions, {len(t)} labels")
    return ConfusionMatrix(
        tp=int(np.sum((p == 1) & (t == 1))),
        fp=int(np.sum((p == 1) & (t == 0))),
        tn=int(np.sum((p == 0) & (t == 0))),
        fn=int(np.sum((p == 0) & (t == 1))),
    )


def metrics_from_cm(cm: ConfusionMatrix, auc: float | None = None) -> MetricSet:
    """Accuracy, precision, recall and F1. An undefined precision or recall
    (zero denominator) is reported as 0 and flagged."""
    if cm.total == 0:
        raise MetricsError("confusion matrix is empty")
    accuracy = (cm.tp + cm.tn) / cm.total
    precision_undefined = cm.tp + cm.fp == 0
    recall_undefined = cm.tp + cm.fn == 0
    precision = 0.0 if precision_undefined else cm.tp / (cm.tp + cm.fp)
    recall = 0.0 if recall_undefined else cm.tp / (cm.tp + cm.fn)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    specificity = cm.tn / (cm.tn + cm.fp) if cm.tn + cm.fp else 0.0
    return MetricSet(accuracy, precision, recall, f1, auc, specificity,
                     precision_undefined, recall_undefined)


@dataclass(frozen=True)
class RocCurve:
    fpr: tuple[float, ...]
    tpr: tuple[float, ...]
    thresholds: tuple[float, ...] = ()

    def __post_init__(self):
        if len(self.fpr) != len(self.tpr) or len(self.fpr) < 2:
            raise MetricsError("ROC curve needs matching fpr/tpr with at least 2 points")
        if (self.fpr[0], self.tpr[0]) != (0.0, 0.0) or (self.fpr[-1], self.tpr[-1]) != (1.0, 1.0):
            raise MetricsError("ROC curve must run from (0, 0) to (1, 1)")
        f, t = np.asarray(self.fpr), np.asarray(self.tpr)
        if (np.diff(f) < 0).any() or (np.diff(t) < 0).any():
            raise MetricsError("ROC curve must be nondecreasing")

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.fpr, self.tpr))

    def __len__(self):
        return len(self.fpr)


def roc(scores: Sequence[float], truth: Sequence[int]) -> RocCurve:
    """One point per distinct score, sweeping the threshold from high to low.

    Tied scores enter together, so a tie block contributes a diagonal segment.
    ``thresholds[i]`` is the score cut for point i (``inf`` at the origin).
    """
    s = np.asarray(scores, dtype=np.float64)
    y = _labels(truth, "truth")
    if s.shape != y.shape:
        raise MetricsError(f"length mismatch: {len(s)} scores, {len(y)} labels")
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricsError("ROC needs both classes in the ground truth")
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    # last position of each block of equal scores
    ends = np.r_[np.flatnonzero(np.diff(s) != 0), len(s) - 1]
    tp = np.cumsum(y)[ends]
    fp = (ends + 1) - tp
    fpr = np.r_[0.0, fp / n_neg]
    tpr = np.r_[0.0, tp / n_pos]
    thresholds = np.r_[np.inf, s[ends]]
    return RocCurve(tuple(fpr.tolist()), tuple(tpr.tolist()), tuple(thresholds.tolist()))


def auc(curve: RocCurve) -> float:
    """Trapezoidal area under the curve."""
    f, t = np.asarray(curve.fpr), np.asarray(curve.tpr)
    return float(np.sum(np.diff(f) * (t[1:] + t[:-1]) / 2.0))


def roc_auc(scores: Sequence[float], truth: Sequence[int]) -> float:
    return auc(roc(scores, truth))


def evaluate(predicted, scores, truth) -> tuple[ConfusionMatrix, MetricSet, RocCurve | None]:
    """Confusion matrix, metrics and ROC for one evaluated model. The ROC and AUC
    are None when ``truth`` holds a single class."""
    cm = confusion(predicted, truth)
    truth = np.asarray(truth)
    curve = roc(scores, truth) if 0 < truth.sum() < len(truth) else None
    return cm, metrics_from_cm(cm, auc(curve) if curve else None), curve


def write_roc_csv(curve: RocCurve, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["fpr", "tpr"])
        for f, t in curve.points:
            writer.writerow([repr(f), repr(t)])


def read_roc_csv(path: str | Path) -> RocCurve:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return RocCurve(tuple(float(r["fpr"]) for r in rows), tuple(float(r["tpr"]) for r in rows))
