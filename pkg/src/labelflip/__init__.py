"""Label-flipping data-poisoning attacks on binary malware classifiers."""

from .attacks import (
    AttackSpec,
    FlipLog,
    apply_attack,
    eligible_targets,
    flip_random,
    flip_targeted,
)
from .dataset import (
    LabeledDataset,
    SplitSpec,
    SyscallTrace,
    featurize_3gram,
    generate_synthetic,
    load_csv,
    save_csv,
    split,
)
from .explain import FeatureImportanceRanking, gini_importance, pareto_top
from .harness import ExperimentPlan, ExperimentReport, compare, emit_report, run_plan
from .metrics import (
    ConfusionMatrix,
    MetricSet,
    RocCurve,
    auc,
    confusion,
    evaluate,
    metrics_from_cm,
    roc,
)
from .models import ModelKind, TrainedModel, predict_batch, score, train

__version__ = "0.1.0"
