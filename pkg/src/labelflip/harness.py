"""Experiment sweeps: every (model, attack, ratio, repeat) cell is trained from
scratch on a poisoned copy of one fixed training partition and scored on the
untouched test partition.

Seeds are derived from the master seed and cell coordinates, never from
execution order, so serial and parallel runs give byte-identical reports.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .attacks import AUTO, AttackSpec, FlipLog, apply_attack, train_explainer
from .dataset import LabeledDataset, SplitSpec, generate_synthetic, load_csv, split
from .explain import FeatureImportanceRanking, gini_importance, pareto_top, write_ranking_csv
from .metrics import ConfusionMatrix, MetricSet, RocCurve, evaluate, write_roc_csv
from .models import (
    ForestParams,
    Hyperparameters,
    ModelKind,
    default_hyperparameters,
    hyperparameters_from_dict,
    predict_batch,
    train,
)

log = logging.getLogger(__name__)

DEFAULT_RATIOS = (0.0, 0.25, 0.5, 0.75, 1.0)
DEFAULT_REPEATS = 10
HIGH_SEPARATION = 3.0

SUMMARY_COLUMNS = (
    "model", "attack", "level", "mode", "ratio", "seed", "train_seed", "attack_seed",
    "accuracy", "precision", "recall", "f1", "auc", "specificity",
    "precision_undefined", "recall_undefined", "tp", "fp", "tn", "fn",
    "flips_selected", "flips_changed", "clean_accuracy", "accuracy_drop",
    "clean_auc", "auc_drop",
)


class PlanError(ValueError):
    pass


class CellError(RuntimeError):
    """A module error raised inside one experiment cell."""


def derive_seed(master: int, *coords) -> int:
    """Stable 63-bit seed from the master seed and cell coordinates."""
    key = "|".join(str(c) for c in (master, *coords)).encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big") >> 1


# -- plan --------------------------------------------------------------------


@dataclass(frozen=True)
class ModelSpec:
    kind: ModelKind
    hyperparameters: Hyperparameters

    @classmethod
    def of(cls, kind, hp: dict | Hyperparameters | None = None) -> ModelSpec:
        kind = ModelKind.parse(kind)
        if hp is None or isinstance(hp, dict):
            hp = hyperparameters_from_dict(kind, hp)
        return cls(kind, hp)

    def to_dict(self) -> dict:
        from dataclasses import asdict

        return {"kind": self.kind.value, "hyperparameters": asdict(self.hyperparameters)}


@dataclass(frozen=True)
class DatasetSource:
    csv_path: str | None = None
    synthetic: Mapping | None = None

    def __post_init__(self):
        if (self.csv_path is None) == (self.synthetic is None):
            raise PlanError("dataset source needs exactly one of 'csv' or 'synthetic'")

    def load(self) -> LabeledDataset:
        if self.csv_path is not None:
            return load_csv(self.csv_path)
        return generate_synthetic(**self.synthetic)

    def to_dict(self) -> dict:
        if self.csv_path is not None:
            return {"csv": self.csv_path}
        return {"synthetic": dict(self.synthetic)}


def default_synthetic(seed: int = 7) -> dict:
    return {"n_per_class": 1000, "d": 50, "separation": HIGH_SEPARATION, "seed": seed}


@dataclass(frozen=True)
class ExperimentPlan:
    dataset: DatasetSource
    models: tuple[ModelSpec, ...]
    attacks: tuple[AttackSpec, ...]
    split: SplitSpec = SplitSpec()
    ratios: tuple[float, ...] = DEFAULT_RATIOS
    repeats: int = DEFAULT_REPEATS
    seed: int = 0
    explainer: ForestParams = ForestParams()

    def __post_init__(self):
        object.__setattr__(self, "models", tuple(self.models))
        object.__setattr__(self, "attacks", tuple(self.attacks))
        object.__setattr__(self, "ratios", tuple(float(r) for r in self.ratios))
        if not self.models:
            raise PlanError("plan has no models")
        if not self.attacks:
            raise PlanError("plan has no attacks")
        if not self.ratios:
            raise PlanError("plan has no ratios")
        if any(not 0 <= r <= 1 for r in self.ratios):
            raise PlanError("ratios must lie in [0, 1]")
        if len(set(self.ratios)) != len(self.ratios):
            raise PlanError("duplicate ratios")
        if self.repeats < 1:
            raise PlanError("repeats must be >= 1")
        if self.seed < 0:
            raise PlanError("seed must be nonnegative")
        kinds = [m.kind for m in self.models]
        if len(set(kinds)) != len(kinds):
            raise PlanError("each model kind may appear once per plan")
        labels = [a.label for a in self.attacks]
        if len(set(labels)) != len(labels):
            raise PlanError(f"attack labels must be unique, got {labels}")

    @property
    def n_cells(self) -> int:
        return len(self.models) * len(self.attacks) * len(self.ratios) * self.repeats

    def to_dict(self) -> dict:
        from dataclasses import asdict

        return {
            "dataset": self.dataset.to_dict(),
            "split": asdict(self.split),
            "models": [m.to_dict() for m in self.models],
            "attacks": [_attack_template(a) for a in self.attacks],
            "ratios": list(self.ratios),
            "repeats": self.repeats,
            "seed": self.seed,
            "explainer": asdict(self.explainer),
        }

    @classmethod
    def from_dict(cls, doc: Mapping, base_dir: str | Path | None = None) -> ExperimentPlan:
        doc = dict(doc)
        src = doc.get("dataset") or {"synthetic": default_synthetic()}
        if "csv" in src:
            path = Path(src["csv"])
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            source = DatasetSource(csv_path=str(path))
        elif "synthetic" in src:
            source = DatasetSource(synthetic={**default_synthetic(), **src["synthetic"]})
        else:
            raise PlanError("dataset must name 'csv' or 'synthetic'")
        models = []
        for m in doc.get("models") or [k.value for k in ModelKind]:
            if isinstance(m, str):
                models.append(ModelSpec.of(m))
            else:
                models.append(ModelSpec.of(m["kind"], m.get("hyperparameters")))
        attacks = [AttackSpec.from_dict(a) for a in doc.get("attacks") or default_attacks_doc()]
        try:
            return cls(
                dataset=source,
                models=tuple(models),
                attacks=tuple(attacks),
                split=SplitSpec(**doc.get("split", {})),
                ratios=tuple(doc.get("ratios", DEFAULT_RATIOS)),
                repeats=int(doc.get("repeats", DEFAULT_REPEATS)),
                seed=int(doc.get("seed", 0)),
                explainer=ForestParams(**doc.get("explainer", {})),
            )
        except TypeError as exc:
            raise PlanError(f"bad plan: {exc}") from None

    @classmethod
    def load(cls, path: str | Path) -> ExperimentPlan:
        path = Path(path)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise PlanError(f"{path}: invalid JSON: {exc}") from None
        return cls.from_dict(doc, base_dir=path.parent)


def default_attacks_doc() -> list[dict]:
    return [
        {"level": 1, "mode": "uniform_random"},
        {"level": 1, "mode": "invert"},
        {"level": 2, "targeting": "auto"},
    ]


def _attack_template(a: AttackSpec) -> dict:
    d = a.to_dict()
    d.pop("ratio")
    d.pop("seed")
    return d


# -- results -----------------------------------------------------------------


@dataclass(frozen=True)
class CellResult:
    model: str
    attack: str
    level: int
    mode: str | None
    ratio: float
    seed: int  # repeat index
    train_seed: int
    attack_seed: int
    confusion: ConfusionMatrix
    metrics: MetricSet
    roc: RocCurve | None
    flips_selected: int
    flips_changed: int
    clean_accuracy: float
    clean_auc: float | None

    @property
    def accuracy_drop(self) -> float:
        return self.clean_accuracy - self.metrics.accuracy

    @property
    def auc_drop(self) -> float | None:
        if self.clean_auc is None or self.metrics.auc is None:
            return None
        return self.clean_auc - self.metrics.auc

    @property
    def sort_key(self):
        return (self.model, self.attack, self.ratio, self.seed)

    def as_row(self) -> dict:
        m = self.metrics
        return {
            "model": self.model, "attack": self.attack, "level": self.level,
            "mode": self.mode or "", "ratio": self.ratio, "seed": self.seed,
            "train_seed": self.train_seed, "attack_seed": self.attack_seed,
            "accuracy": m.accuracy, "precision": m.precision, "recall": m.recall,
            "f1": m.f1, "auc": m.auc, "specificity": m.specificity,
            "precision_undefined": m.precision_undefined,
            "recall_undefined": m.recall_undefined,
            **self.confusion.as_dict(),
            "flips_selected": self.flips_selected, "flips_changed": self.flips_changed,
            "clean_accuracy": self.clean_accuracy, "accuracy_drop": self.accuracy_drop,
            "clean_auc": self.clean_auc, "auc_drop": self.auc_drop,
        }


@dataclass
class ExperimentReport:
    plan: ExperimentPlan
    rows: list[CellResult]
    poisonings: dict[tuple[str, float, int], FlipLog] = field(default_factory=dict)
    rankings: dict[int, FeatureImportanceRanking] = field(default_factory=dict)
    target_features: dict[tuple[str, int], list[str]] = field(default_factory=dict)
    n_train: int = 0
    n_test: int = 0
    test_fingerprint: str = ""

    def cells(self, model=None, attack=None, ratio=None, seed=None) -> list[CellResult]:
        out = self.rows
        for attr, want in (("model", model), ("attack", attack), ("ratio", ratio), ("seed", seed)):
            if want is not None:
                want = str(want) if attr == "model" else want
                out = [r for r in out if getattr(r, attr) == want]
        return out

    def to_dict(self) -> dict:
        return {
            "plan": self.plan.to_dict(),
            "n_train": self.n_train,
            "n_test": self.n_test,
            "test_fingerprint": self.test_fingerprint,
            "rows": [
                {**r.as_row(), "roc": None if r.roc is None else
                 {"fpr": list(r.roc.fpr), "tpr": list(r.roc.tpr)}}
                for r in self.rows
            ],
            "poisonings": [
                {"attack": a, "ratio": q, "seed": s, **self.poisonings[(a, q, s)].to_dict()}
                for a, q, s in sorted(self.poisonings)
            ],
            "importance": {
                str(s): [[n, v] for n, v in self.rankings[s].entries]
                for s in sorted(self.rankings)
            },
            "target_features": [
                {"attack": a, "seed": s, "features": self.target_features[(a, s)]}
                for a, s in sorted(self.target_features)
            ],
        }


def fingerprint(data: LabeledDataset) -> str:
    h = hashlib.sha256()
    h.update("\x1f".join(data.feature_names).encode())
    h.update(np.ascontiguousarray(data.rows).tobytes())
    h.update(np.ascontiguousarray(data.labels).tobytes())
    return h.hexdigest()


# -- execution ---------------------------------------------------------------


@dataclass(frozen=True)
class _Unit:
    """All cells of one (model, repeat): a clean fit plus one fit per poisoning."""

    model: ModelSpec
    repeat: int
    train_seed: int
    # (attack label, ratio, attack seed, poisoned labels or None for clean)
    jobs: tuple


def _fit_and_score(spec: ModelSpec, train_data, test_data, seed):
    model = train(spec.kind, spec.hyperparameters, train_data, seed)
    predicted, scores = predict_batch(model, test_data)
    return evaluate(predicted, scores, test_data.labels)


def _run_unit(unit: _Unit, train_data: LabeledDataset, test_data: LabeledDataset):
    kind = unit.model.kind.value
    try:
        clean = _fit_and_score(unit.model, train_data, test_data, unit.train_seed)
    except Exception as exc:
        raise CellError(f"model={kind} attack=clean seed={unit.repeat}: {exc}") from exc
    results = {}
    for label, ratio, attack_seed, labels in unit.jobs:
        if labels is None:
            results[(label, ratio)] = clean
            continue
        try:
            results[(label, ratio)] = _fit_and_score(
                unit.model, train_data.with_labels(labels), test_data, unit.train_seed
            )
        except Exception as exc:
            raise CellError(
                f"model={kind} attack={label} ratio={ratio} seed={unit.repeat}: {exc}"
            ) from exc
    return clean, results


def _worker(args):
    return _run_unit(*args)


def run_plan(
    plan: ExperimentPlan,
    workers: int = 1,
    data: LabeledDataset | None = None,
) -> ExperimentReport:
    """Execute every cell of ``plan``.

    ``workers > 1`` spreads (model, repeat) units over processes; the report is
    identical either way. ``data`` overrides the plan's dataset source.
    """
    if data is None:
        data = plan.dataset.load()
    train_data, test_data = split(data, plan.split)
    log.info("split: %d train / %d test rows", len(train_data), len(test_data))

    poisonings: dict[tuple[str, float, int], FlipLog] = {}
    rankings: dict[int, FeatureImportanceRanking] = {}
    targets: dict[tuple[str, int], list[str]] = {}
    poisoned_labels: dict[tuple[str, float, int], np.ndarray | None] = {}

    for repeat in range(plan.repeats):
        for attack in plan.attacks:
            features = None
            if attack.level == 2:
                if attack.targeting == AUTO:
                    if repeat not in rankings:
                        explainer = train_explainer(
                            train_data, derive_seed(plan.seed, "explain", repeat), plan.explainer
                        )
                        rankings[repeat] = gini_importance(explainer)
                    features = pareto_top(rankings[repeat], attack.pareto_mass)
                else:
                    features = list(attack.targeting)
                targets[(attack.label, repeat)] = features
            attack_seed = derive_seed(plan.seed, "attack", attack.label, repeat)
            for ratio in plan.ratios:
                spec = replace(attack, ratio=ratio, seed=attack_seed)
                try:
                    poisoned, flips = apply_attack(train_data, spec, features)
                except Exception as exc:
                    raise CellError(
                        f"attack={attack.label} ratio={ratio} seed={repeat}: {exc}"
                    ) from exc
                key = (attack.label, ratio, repeat)
                poisonings[key] = flips
                poisoned_labels[key] = None if ratio == 0 else np.asarray(poisoned.labels)

    units = []
    for model in plan.models:
        for repeat in range(plan.repeats):
            jobs = tuple(
                (a.label, q, derive_seed(plan.seed, "attack", a.label, repeat),
                 poisoned_labels[(a.label, q, repeat)])
                for a in plan.attacks for q in plan.ratios
            )
            units.append(_Unit(model, repeat, derive_seed(plan.seed, "train", model.kind.value, repeat), jobs))

    args = [(u, train_data, test_data) for u in units]
    if workers > 1 and len(units) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_worker, args))
    else:
        outcomes = [_worker(a) for a in args]

    rows = []
    for unit, (clean, results) in zip(units, outcomes):
        clean_metrics = clean[1]
        for label, ratio, attack_seed, _ in unit.jobs:
            cm, metrics, curve = results[(label, ratio)]
            attack = next(a for a in plan.attacks if a.label == label)
            flips = poisonings[(label, ratio, unit.repeat)]
            rows.append(CellResult(
                model=unit.model.kind.value, attack=label, level=attack.level,
                mode=attack.mode, ratio=ratio, seed=unit.repeat,
                train_seed=unit.train_seed, attack_seed=attack_seed,
                confusion=cm, metrics=metrics, roc=curve,
                flips_selected=flips.n_selected, flips_changed=flips.n_changed,
                clean_accuracy=clean_metrics.accuracy, clean_auc=clean_metrics.auc,
            ))
    rows.sort(key=lambda r: r.sort_key)
    return ExperimentReport(
        plan=plan, rows=rows, poisonings=poisonings, rankings=rankings,
        target_features=targets, n_train=len(train_data), n_test=len(test_data),
        test_fingerprint=fingerprint(test_data),
    )


# -- comparison ----------------------------------------------------------------


@dataclass(frozen=True)
class ComparisonRow:
    model: str
    attack: str
    ratio: float
    n_seeds: int
    clean_accuracy: float
    attacked_accuracy: float
    accuracy_drop_mean: float
    accuracy_drop_std: float
    auc_drop_mean: float | None
    auc_drop_std: float | None

    def as_row(self) -> dict:
        from dataclasses import asdict

        return asdict(self)


def _num(v):
    if v is None or v == "":
        return None
    return float(v)


def _std(xs: Sequence[float]) -> float:
    return statistics.stdev(xs) if len(xs) > 1 else 0.0


def compare(
    clean_cells: Iterable[Mapping], attacked_cells: Iterable[Mapping]
) -> list[ComparisonRow]:
    """Mean and sample standard deviation, across seeds, of the accuracy and
    AUC drop of each (model, attack, ratio) group against its clean cells.

    Cells are mappings with ``model``, ``seed``, ``accuracy``, ``auc`` keys
    (attacked ones also ``attack`` and ``ratio``), e.g. :meth:`CellResult.as_row`.
    """
    clean = {}
    for c in clean_cells:
        key = (str(c["model"]), int(c["seed"]))
        clean.setdefault(key, c)
    groups: dict[tuple[str, str, float], list[tuple[Mapping, Mapping]]] = {}
    for a in attacked_cells:
        key = (str(a["model"]), int(a["seed"]))
        if key not in clean:
            raise PlanError(f"no clean cell for model={key[0]} seed={key[1]}")
        groups.setdefault((key[0], str(a.get("attack", "")), float(a["ratio"])), []).append(
            (clean[key], a)
        )
    out = []
    for (model, attack, ratio), pairs in sorted(groups.items()):
        acc_drop = [_num(c["accuracy"]) - _num(a["accuracy"]) for c, a in pairs]
        aucs = [(_num(c["auc"]), _num(a["auc"])) for c, a in pairs]
        auc_drop = [c - a for c, a in aucs if c is not None and a is not None]
        has_auc = len(auc_drop) == len(pairs)
        out.append(ComparisonRow(
            model=model, attack=attack, ratio=ratio, n_seeds=len(pairs),
            clean_accuracy=statistics.fmean(_num(c["accuracy"]) for c, _ in pairs),
            attacked_accuracy=statistics.fmean(_num(a["accuracy"]) for _, a in pairs),
            accuracy_drop_mean=statistics.fmean(acc_drop),
            accuracy_drop_std=_std(acc_drop),
            auc_drop_mean=statistics.fmean(auc_drop) if has_auc else None,
            auc_drop_std=_std(auc_drop) if has_auc else None,
        ))
    return out


def compare_rows(rows: Sequence[Mapping]) -> list[ComparisonRow]:
    """Compare every row of a report against the ratio-0 cells of that report."""
    clean = [r for r in rows if float(r["ratio"]) == 0.0]
    if not clean:
        raise PlanError("report has no ratio-0 (clean) cells to compare against")
    return compare(clean, rows)


def compare_report(report: ExperimentReport) -> list[ComparisonRow]:
    return compare_rows([r.as_row() for r in report.rows])


# -- output --------------------------------------------------------------------


def _csv_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _csv_text(columns: Sequence[str], rows: Iterable[Mapping]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_csv_value(row[c]) for c in columns])
    return buf.getvalue()


def summary_csv(report: ExperimentReport) -> str:
    return _csv_text(SUMMARY_COLUMNS, (r.as_row() for r in report.rows))


def comparison_csv(rows: Sequence[ComparisonRow]) -> str:
    columns = tuple(ComparisonRow.__dataclass_fields__)
    return _csv_text(columns, (r.as_row() for r in rows))


def report_json(report: ExperimentReport) -> str:
    return json.dumps(report.to_dict(), indent=1, sort_keys=True) + "\n"


def roc_filename(cell: CellResult) -> str:
    return f"{cell.model}_{cell.attack}_{cell.ratio:g}_{cell.seed}.csv"


def read_summary(path: str | Path) -> list[dict]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def emit_report(
    report: ExperimentReport, directory: str | Path, figures: bool = False
) -> list[Path]:
    """Write ``report.json``, ``summary.csv``, ``comparison.csv``, one ROC CSV per
    cell under ``roc/`` and, for auto-targeted plans, importance rankings under
    ``importance/``. ``figures=True`` also renders PNG charts under ``figures/``.
    """
    if not report.rows:
        raise PlanError("report is empty; nothing written")
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def put(rel: str, text: str):
        path = out / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        written.append(path)

    put("report.json", report_json(report))
    put("summary.csv", summary_csv(report))
    comparison = compare_report(report)
    put("comparison.csv", comparison_csv(comparison))
    for cell in report.rows:
        if cell.roc is not None:
            path = out / "roc" / roc_filename(cell)
            path.parent.mkdir(exist_ok=True)
            write_roc_csv(cell.roc, path)
            written.append(path)
    for repeat, ranking in sorted(report.rankings.items()):
        path = out / "importance" / f"seed_{repeat}.csv"
        path.parent.mkdir(exist_ok=True)
        write_ranking_csv(ranking, path)
        written.append(path)
    if figures:
        from .plotting import render_report_figures

        written.extend(render_report_figures(report, comparison, out / "figures"))
    return written
