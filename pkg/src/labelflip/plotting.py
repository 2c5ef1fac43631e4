"""Matplotlib renderings of experiment reports.

Figures are built on bare ``Figure`` objects with the Agg canvas, so nothing
touches pyplot's global state and rendering is safe inside worker processes.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .explain import DEFAULT_PARETO_MASS, FeatureImportanceRanking

GOLDEN = (math.sqrt(5) - 1.0) / 2.0
DPI = 120

# fixed metadata keeps PNG bytes reproducible
_PNG_META = {"Software": None}


def new_figure(width: float = 6.4, height: float | None = None, **subplots):
    fig = Figure(figsize=(width, height or width * GOLDEN))
    FigureCanvasAgg(fig)
    axes = fig.subplots(**subplots) if subplots else fig.add_subplot()
    return fig, axes


def save(fig: Figure, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=DPI, metadata=_PNG_META, bbox_inches="tight")
    return path


def plot_accuracy_drop(comparison, attack: str, ax=None):
    """Grouped bars: mean accuracy drop per model at each poisoned ratio,
    with one standard deviation as error bars."""
    rows = [r for r in comparison if r.attack == attack and r.ratio > 0]
    models = sorted({r.model for r in rows})
    ratios = sorted({r.ratio for r in rows})
    if ax is None:
        _, ax = new_figure()
    width = 0.8 / max(len(ratios), 1)
    x = np.arange(len(models))
    for i, ratio in enumerate(ratios):
        cell = {r.model: r for r in rows if r.ratio == ratio}
        means = [cell[m].accuracy_drop_mean if m in cell else np.nan for m in models]
        errs = [cell[m].accuracy_drop_std if m in cell else 0.0 for m in models]
        ax.bar(x + (i - (len(ratios) - 1) / 2) * width, means, width,
               yerr=errs, capsize=2, label=f"{ratio:.0%}")
    ax.set_xticks(x, models, rotation=20)
    ax.set_ylabel("accuracy drop")
    ax.set_title(f"Accuracy drop, {attack}")
    ax.axhline(0.0, color="black", linewidth=0.6)
    ax.legend(title="poisoned", fontsize="small")
    return ax


def plot_roc_family(curves: Sequence[tuple[str, object]], title: str = "", ax=None):
    """Overlay ROC curves given as (legend label, RocCurve) pairs."""
    if ax is None:
        _, ax = new_figure(4.8, 4.8)
    for label, curve in curves:
        ax.plot(curve.fpr, curve.tpr, drawstyle="default", label=label)
    ax.plot([0, 1], [0, 1], linestyle=":", color="grey", linewidth=0.8)
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.01)
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_title(title)
    ax.legend(loc="lower right", fontsize="small")
    return ax


def plot_confusion(cm, title: str = "", ax=None):
    if ax is None:
        _, ax = new_figure(3.2, 3.2)
    grid = np.array([[cm.tn, cm.fp], [cm.fn, cm.tp]])
    ax.imshow(grid, cmap="Blues", vmin=0, vmax=max(1, grid.max()))
    for (i, j), v in np.ndenumerate(grid):
        ax.text(j, i, str(v), ha="center", va="center",
                color="white" if v > grid.max() / 2 else "black")
    ax.set_xticks([0, 1], ["benign", "malign"])
    ax.set_yticks([0, 1], ["benign", "malign"])
    ax.set_xlabel("predicted")
    ax.set_ylabel("actual")
    ax.set_title(title, fontsize="small")
    return ax


def plot_pareto(ranking: FeatureImportanceRanking, top: int = 20,
                mass: float = DEFAULT_PARETO_MASS, ax=None):
    """Importance bars in descending order with the cumulative share as a line."""
    entries = ranking.entries[:top]
    if ax is None:
        _, ax = new_figure(8.0)
    x = np.arange(len(entries))
    ax.bar(x, [v for _, v in entries], color="tab:blue")
    ax.set_xticks(x, [n for n, _ in entries], rotation=70, fontsize="x-small")
    ax.set_ylabel("importance")
    twin = ax.twinx()
    twin.plot(x, np.cumsum([v for _, v in entries]), color="tab:red", marker=".")
    twin.axhline(mass, color="tab:red", linestyle="--", linewidth=0.8)
    twin.set_ylim(0, 1.05)
    twin.set_ylabel("cumulative importance")
    ax.set_title("Feature importance (Pareto)")
    return ax


def render_report_figures(report, comparison, directory: str | Path) -> list[Path]:
    """Accuracy-drop bars per attack, ROC families and confusion grids for
    seed 0 of every (model, attack), and the seed-0 Pareto chart."""
    directory = Path(directory)
    written = []
    attacks = [a.label for a in report.plan.attacks]
    models = sorted({r.model for r in report.rows})
    for attack in attacks:
        fig, ax = new_figure()
        plot_accuracy_drop(comparison, attack, ax)
        written.append(save(fig, directory / f"accuracy_drop_{attack}.png"))
        for model in models:
            cells = sorted(report.cells(model=model, attack=attack, seed=0),
                           key=lambda c: c.ratio)
            if not cells:
                continue
            curves = [(f"{c.ratio:.0%} (AUC {c.metrics.auc:.3f})", c.roc)
                      for c in cells if c.roc is not None]
            if curves:
                fig, ax = new_figure(4.8, 4.8)
                plot_roc_family(curves, f"{model}, {attack}", ax)
                written.append(save(fig, directory / f"roc_{model}_{attack}.png"))
            fig, axes = new_figure(3.0 * len(cells), 3.2, nrows=1, ncols=len(cells),
                                   squeeze=False)
            for ax, c in zip(axes[0], cells):
                plot_confusion(c.confusion, f"{c.ratio:.0%} poisoned", ax)
            fig.suptitle(f"{model}, {attack}")
            written.append(save(fig, directory / f"confusion_{model}_{attack}.png"))
    if 0 in report.rankings:
        fig, ax = new_figure(8.0)
        plot_pareto(report.rankings[0], ax=ax)
        written.append(save(fig, directory / "pareto_seed_0.png"))
    return written
