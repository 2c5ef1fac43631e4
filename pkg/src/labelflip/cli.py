"""Command-line entry point: ``labelflip <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import attacks, harness
from .dataset import (
    SplitSpec,
    SyscallTrace,
    featurize_3gram,
    generate_synthetic,
    load_csv,
    save_csv,
    split,
)
from .explain import gini_importance, pareto_top
from .metrics import evaluate
from .models import ModelKind, predict_batch, save_model, train


def _write_or_print(text: str, out: str | None):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_synth(args):
    data = generate_synthetic(args.n_per_class, args.features, args.separation, args.seed)
    save_csv(data, args.out)
    print(f"wrote {len(data)} rows x {data.n_features} features to {args.out}")


def _read_traces(path: Path):
    """JSON lines, one ``{"calls": [...], "label": 0|1}`` object per line."""
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
            yield SyscallTrace(tuple(doc["calls"])), int(doc["label"])
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ValueError(f"{path}:{lineno}: bad trace record: {exc}") from None


def cmd_featurize(args):
    vocabulary = None
    if args.vocabulary:
        vocabulary = [v.strip() for v in Path(args.vocabulary).read_text().splitlines() if v.strip()]
    data = featurize_3gram(list(_read_traces(Path(args.traces))), vocabulary)
    save_csv(data, args.out)
    print(f"wrote {len(data)} rows x {data.n_features} 3-gram features to {args.out}")


def _split_spec(args) -> SplitSpec:
    return SplitSpec(args.train_fraction, args.test_fraction, args.split_seed,
                     fold_remainder=args.fold_remainder)


def cmd_train(args):
    data = load_csv(args.dataset)
    train_data, test_data = split(data, _split_spec(args))
    hp = json.loads(args.hp) if args.hp else None
    model = train(args.model, hp, train_data, args.seed)
    predicted, scores = predict_batch(model, test_data)
    cm, metrics, _ = evaluate(predicted, scores, test_data.labels)
    result = {"model": model.kind.value, "n_train": len(train_data),
              "n_test": len(test_data), "confusion": cm.as_dict(),
              "metrics": metrics.as_dict()}
    if model.importance is not None:
        result["pareto_features"] = pareto_top(gini_importance(model), args.pareto_mass) \
            if model.importance.sum() > 0 else []
    if args.out:
        save_model(model, args.out)
        result["saved"] = args.out
    print(json.dumps(result, indent=1))


def cmd_attack(args):
    data = load_csv(args.dataset)
    if args.level == 2:
        targeting = tuple(f.strip() for f in args.features.split(",")) if args.features else attacks.AUTO
        spec = attacks.AttackSpec(2, args.ratio, targeting=targeting, threshold=args.threshold,
                                  seed=args.seed, pareto_mass=args.pareto_mass)
    else:
        spec = attacks.AttackSpec(1, args.ratio, mode=args.mode, seed=args.seed)
    poisoned, flips = attacks.apply_attack(data, spec)
    save_csv(poisoned, args.out)
    log_path = Path(str(args.out) + ".fliplog.json")
    log_path.write_text(json.dumps({"attack": spec.to_dict(), **flips.to_dict()}, indent=1) + "\n")
    print(f"{spec.label} ratio={args.ratio}: {flips.n_selected} selected, "
          f"{flips.n_changed} labels changed; wrote {args.out} and {log_path}")


def cmd_run_plan(args):
    if args.plan:
        plan = harness.ExperimentPlan.load(args.plan)
    else:
        plan = harness.ExperimentPlan.from_dict({})
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.dataset:
        overrides["dataset"] = harness.DatasetSource(csv_path=args.dataset)
    if args.repeats is not None:
        overrides["repeats"] = args.repeats
    if overrides:
        from dataclasses import replace

        plan = replace(plan, **overrides)
    report = harness.run_plan(plan, workers=args.workers)
    written = harness.emit_report(report, args.out, figures=args.figures)
    print(f"{len(report.rows)} cells; wrote {len(written)} files to {args.out}")


def cmd_compare(args):
    src = Path(args.report)
    if src.is_dir():
        src = src / "summary.csv"
    if src.suffix == ".json":
        rows = json.loads(src.read_text(encoding="utf-8"))["rows"]
    else:
        rows = harness.read_summary(src)
    table = harness.compare_rows(rows)
    _write_or_print(harness.comparison_csv(table), args.out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="labelflip",
        description="Label-flipping poisoning experiments on binary malware classifiers.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic 3-gram dataset CSV")
    p.add_argument("--n-per-class", type=int, default=1000)
    p.add_argument("--features", "-d", type=int, default=50)
    p.add_argument("--separation", type=float, default=harness.HIGH_SEPARATION)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("featurize", help="turn system-call traces (JSON lines) into a 3-gram CSV")
    p.add_argument("--traces", required=True)
    p.add_argument("--vocabulary", help="file with one 3-gram name per line")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_featurize)

    def add_split(p):
        p.add_argument("--train-fraction", type=float, default=0.6)
        p.add_argument("--test-fraction", type=float, default=0.2)
        p.add_argument("--split-seed", type=int, default=0)
        p.add_argument("--fold-remainder", action="store_true",
                       help="add the unassigned rows to the training partition")

    p = sub.add_parser("train", help="train one model and report clean test metrics")
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", required=True, choices=[k.value for k in ModelKind])
    p.add_argument("--hp", help="hyperparameters as a JSON object")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pareto-mass", type=float, default=0.8)
    p.add_argument("--out", help="save the trained model as JSON")
    add_split(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("attack", help="poison a dataset's labels and write the result")
    p.add_argument("--dataset", required=True)
    p.add_argument("--level", type=int, choices=(1, 2), default=1)
    p.add_argument("--ratio", type=float, required=True)
    p.add_argument("--mode", choices=attacks.LEVEL1_MODES, default=attacks.UNIFORM_RANDOM)
    p.add_argument("--features", help="level 2: comma-separated targets (default: auto)")
    p.add_argument("--threshold", type=float, default=0.0)
    p.add_argument("--pareto-mass", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("run-plan", help="run a full experiment plan and write reports")
    p.add_argument("--plan", help="JSON plan (default: all models, all attacks, synthetic data)")
    p.add_argument("--seed", type=int, help="override the plan's master seed")
    p.add_argument("--dataset", help="override the plan's dataset with a CSV")
    p.add_argument("--repeats", type=int, help="override the plan's repeat count")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--figures", action="store_true", help="also render PNG figures")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run_plan)

    p = sub.add_parser("compare", help="accuracy/AUC drop table from a report")
    p.add_argument("--report", required=True, help="report directory, summary.csv or report.json")
    p.add_argument("--out", help="write CSV here instead of stdout")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"labelflip {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
