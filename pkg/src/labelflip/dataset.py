"""Labeled 3-gram datasets: CSV ingestion, trace featurization, splitting and
synthetic generation.

Rows are nonnegative 3-gram counts (or frequencies) of system calls; labels are
0 for benign and 1 for malign.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

LABEL_COLUMN = "label"
BENIGN, MALIGN = 0, 1
NGRAM_SEP = "|"


class DatasetError(ValueError):
    """Malformed input data or an infeasible dataset operation."""


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    feature_names: tuple[str, ...]
    rows: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        names = tuple(str(n) for n in self.feature_names)
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise DatasetError(f"duplicate feature names: {dupes}")
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.size == 0 and rows.ndim != 2:
            rows = rows.reshape(0, len(names))
        if rows.ndim != 2 or rows.shape[1] != len(names):
            raise DatasetError(
                f"rows must have shape (N, {len(names)}), got {rows.shape}"
            )
        labels = np.asarray(self.labels)
        if labels.ndim != 1 or labels.shape[0] != rows.shape[0]:
            raise DatasetError(
                f"{rows.shape[0]} rows but {labels.shape[0] if labels.ndim else 0} labels"
            )
        if labels.size and not np.isin(labels, (BENIGN, MALIGN)).all():
            raise DatasetError("labels must be 0 (benign) or 1 (malign)")
        if not np.isfinite(rows).all():
            raise DatasetError("feature values must be finite")
        if (rows < 0).any():
            raise DatasetError("feature values must be nonnegative")
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "rows", _frozen(rows))
        object.__setattr__(self, "labels", _frozen(labels.astype(np.int64)))

    def __len__(self) -> int:
        return self.rows.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, LabeledDataset):
            return NotImplemented
        return (
            self.feature_names == other.feature_names
            and np.array_equal(self.rows, other.rows)
            and np.array_equal(self.labels, other.labels)
        )

    __hash__ = None

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def subset(self, indices: Sequence[int]) -> LabeledDataset:
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(self.feature_names, self.rows[idx], self.labels[idx])

    def with_labels(self, labels: Sequence[int]) -> LabeledDataset:
        """Same features, new labels. The rows array is shared, not copied."""
        out = object.__new__(LabeledDataset)
        new = np.asarray(labels, dtype=np.int64)
        if new.shape != self.labels.shape:
            raise DatasetError("label vector has the wrong length")
        if new.size and not np.isin(new, (BENIGN, MALIGN)).all():
            raise DatasetError("labels must be 0 (benign) or 1 (malign)")
        object.__setattr__(out, "feature_names", self.feature_names)
        object.__setattr__(out, "rows", self.rows)
        object.__setattr__(out, "labels", _frozen(new))
        return out

    def column(self, name: str) -> np.ndarray:
        try:
            j = self.feature_names.index(name)
        except ValueError:
            raise DatasetError(f"unknown feature {name!r}") from None
        return self.rows[:, j]

    def class_counts(self) -> tuple[int, int]:
        n_malign = int(self.labels.sum())
        return len(self) - n_malign, n_malign


# -- CSV ---------------------------------------------------------------------


def load_csv(path: str | Path) -> LabeledDataset:
    """Read a dataset whose header names the features plus a ``label`` column.

    Errors carry 1-based line numbers and the offending column name.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DatasetError(f"{path}: empty file, expected a header") from None
        if LABEL_COLUMN not in header:
            raise DatasetError(f"{path}: no {LABEL_COLUMN!r} column in header")
        label_at = header.index(LABEL_COLUMN)
        feature_cols = [j for j in range(len(header)) if j != label_at]
        names = [header[j] for j in feature_cols]

        rows, labels = [], []
        for record in reader:
            line = reader.line_num
            if not record or (len(record) == 1 and not record[0].strip()):
                continue
            if len(record) != len(header):
                raise DatasetError(
                    f"{path}:{line}: expected {len(header)} fields, got {len(record)}"
                )
            raw_label = record[label_at].strip()
            if raw_label not in ("0", "1"):
                try:
                    value = float(raw_label)
                except ValueError:
                    value = None
                if value not in (0.0, 1.0):
                    raise DatasetError(
                        f"{path}:{line}: label {raw_label!r} is not 0 or 1"
                    )
                raw_label = str(int(value))
            labels.append(int(raw_label))
            values = []
            for j in feature_cols:
                cell = record[j].strip()
                try:
                    v = float(cell)
                except ValueError:
                    raise DatasetError(
                        f"{path}:{line}: column {header[j]!r}: non-numeric value {cell!r}"
                    ) from None
                if not math.isfinite(v) or v < 0:
                    raise DatasetError(
                        f"{path}:{line}: column {header[j]!r}: value {cell!r} "
                        "must be finite and nonnegative"
                    )
                values.append(v)
            rows.append(values)

    matrix = np.array(rows, dtype=np.float64).reshape(len(rows), len(names))
    return LabeledDataset(tuple(names), matrix, np.array(labels, dtype=np.int64))


def _format_value(v: float) -> str:
    if v.is_integer() and abs(v) < 2**53:
        return str(int(v))
    return repr(v)


def save_csv(data: LabeledDataset, path: str | Path) -> None:
    """Write ``data`` so that :func:`load_csv` recovers it exactly."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([*data.feature_names, LABEL_COLUMN])
        for row, label in zip(data.rows.tolist(), data.labels.tolist()):
            writer.writerow([*(_format_value(v) for v in row), label])


# -- 3-gram featurization ----------------------------------------------------


@dataclass(frozen=True)
class SyscallTrace:
    calls: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        calls = tuple(self.calls)
        for i, c in enumerate(calls):
            if not isinstance(c, str) or not c:
                raise DatasetError(f"system call #{i} must be non-empty text")
        object.__setattr__(self, "calls", calls)

    def ngrams(self, n: int = 3) -> Iterable[str]:
        for i in range(len(self.calls) - n + 1):
            yield NGRAM_SEP.join(self.calls[i : i + n])


def featurize_3gram(
    traces: Iterable[tuple[SyscallTrace | Sequence[str], int]],
    vocabulary: Sequence[str] | None = None,
) -> LabeledDataset:
    """Count contiguous 3-grams per trace.

    Without a ``vocabulary`` the feature set is the sorted union of observed
    3-grams; with one, 3-grams outside it are dropped.
    """
    pairs = []
    for trace, label in traces:
        if not isinstance(trace, SyscallTrace):
            trace = SyscallTrace(tuple(trace))
        pairs.append((trace, int(label)))

    if vocabulary is None:
        names = sorted({g for t, _ in pairs for g in t.ngrams()})
    else:
        names = list(vocabulary)
        if len(set(names)) != len(names):
            raise DatasetError("vocabulary contains duplicate 3-grams")
    column = {name: j for j, name in enumerate(names)}

    rows = np.zeros((len(pairs), len(names)), dtype=np.float64)
    for i, (trace, _) in enumerate(pairs):
        for gram in trace.ngrams():
            j = column.get(gram)
            if j is not None:
                rows[i, j] += 1
    labels = np.array([lab for _, lab in pairs], dtype=np.int64)
    return LabeledDataset(tuple(names), rows, labels)


# -- splitting ---------------------------------------------------------------


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.6
    test_fraction: float = 0.2
    seed: int = 0
    stratify: bool = True
    # put the unassigned remainder into the training partition
    fold_remainder: bool = False

    def __post_init__(self):
        for name in ("train_fraction", "test_fraction"):
            f = getattr(self, name)
            if not 0 < f < 1:
                raise DatasetError(f"{name} must lie in (0, 1), got {f}")
        if self.train_fraction + self.test_fraction > 1 + 1e-12:
            raise DatasetError("train_fraction + test_fraction exceeds 1")
        if self.seed < 0:
            raise DatasetError("seed must be nonnegative")


def _apportion(total: int, quotas: np.ndarray, caps: np.ndarray) -> np.ndarray:
    """Largest-remainder rounding of ``quotas`` to integers summing to ``total``,
    never exceeding ``caps``."""
    counts = np.minimum(np.floor(quotas).astype(np.int64), caps)
    remainders = quotas - np.floor(quotas)
    # largest remainder first, ties to the lower class
    order = sorted(range(len(quotas)), key=lambda c: (-remainders[c], c))
    short = total - int(counts.sum())
    while short > 0:
        progressed = False
        for c in order:
            if short and counts[c] < caps[c]:
                counts[c] += 1
                short -= 1
                progressed = True
        if not progressed:
            raise DatasetError("split sizes exceed the available samples")
    return counts


def split_indices(data: LabeledDataset, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    """Sorted (train, test) index arrays for ``data`` under ``spec``."""
    n = len(data)
    if n < 2:
        raise DatasetError(f"need at least 2 samples to split, got {n}")
    n_train = math.floor(spec.train_fraction * n + 1e-9)
    n_test = math.floor(spec.test_fraction * n + 1e-9)
    if n_train < 1 or n_test < 1:
        raise DatasetError(
            f"fractions {spec.train_fraction}/{spec.test_fraction} leave an empty "
            f"partition for N={n}"
        )
    rng = np.random.default_rng(spec.seed)

    if not spec.stratify:
        perm = rng.permutation(n)
        train, test = perm[:n_train], perm[n_train : n_train + n_test]
        if spec.fold_remainder:
            train = np.concatenate([train, perm[n_train + n_test :]])
        return np.sort(train), np.sort(test)

    strata = [np.flatnonzero(data.labels == c) for c in (BENIGN, MALIGN)]
    sizes = np.array([len(s) for s in strata])
    if (sizes == 0).any():
        empty = "benign" if sizes[0] == 0 else "malign"
        raise DatasetError(f"cannot stratify: no {empty} samples")
    share = sizes / n
    train_c = _apportion(n_train, n_train * share, sizes)
    test_c = _apportion(n_test, n_test * share, sizes - train_c)

    train, test = [], []
    for members, k_train, k_test in zip(strata, train_c, test_c):
        perm = members[rng.permutation(len(members))]
        train.append(perm[:k_train])
        test.append(perm[k_train : k_train + k_test])
        if spec.fold_remainder:
            train.append(perm[k_train + k_test :])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def split(data: LabeledDataset, spec: SplitSpec) -> tuple[LabeledDataset, LabeledDataset]:
    train_idx, test_idx = split_indices(data, spec)
    return data.subset(train_idx), data.subset(test_idx)


# -- synthetic data ----------------------------------------------------------

SYSCALLS = (
    "open", "read", "write", "close", "mmap", "munmap", "fstat", "lseek",
    "ioctl", "poll", "socket", "connect", "sendto", "recvfrom", "getuid",
    "futex", "clone", "execve", "brk", "madvise", "stat", "access", "pread64",
    "writev",
)


def synthetic_feature_names(d: int, rng: np.random.Generator) -> tuple[str, ...]:
    grams = [NGRAM_SEP.join(t) for t in itertools.product(SYSCALLS, repeat=3)]
    if d <= len(grams):
        picked = rng.choice(len(grams), size=d, replace=False)
        return tuple(grams[i] for i in picked)
    return tuple(grams) + tuple(f"gram{j}" for j in range(len(grams), d))


def generate_synthetic(
    n_per_class: int, d: int, separation: float = 1.0, seed: int = 0
) -> LabeledDataset:
    """Two-class Poisson count data shaped like 3-gram histograms.

    Each feature has a shared base rate and leans towards one class, whose rate
    is raised by ``separation`` times a per-feature weight in [0.5, 1.5].
    ``separation=0`` makes the classes identically distributed.
    """
    if n_per_class < 1 or d < 1:
        raise DatasetError("n_per_class and d must be at least 1")
    if separation < 0:
        raise DatasetError("separation must be nonnegative")
    rng = np.random.default_rng(seed)
    names = synthetic_feature_names(d, rng)

    base = rng.uniform(0.5, 3.0, size=d)
    lift = separation * rng.uniform(0.5, 1.5, size=d)
    favours_malign = rng.random(d) < 0.5
    benign_rate = base + np.where(favours_malign, 0.0, lift)
    malign_rate = base + np.where(favours_malign, lift, 0.0)

    rows = np.vstack([
        rng.poisson(benign_rate, size=(n_per_class, d)),
        rng.poisson(malign_rate, size=(n_per_class, d)),
    ]).astype(np.float64)
    labels = np.repeat(np.array([BENIGN, MALIGN]), n_per_class)
    order = rng.permutation(2 * n_per_class)
    return LabeledDataset(names, rows[order], labels[order])
