"""Dataset partitioning and accuracy reporting."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..errors import FruitGradeError, TooFewSamples


@dataclass
class Dataset:
    features: np.ndarray  # (N, d)
    labels: np.ndarray  # (N,) integer class ids 0..C-1
    names: list[str]
    class_names: list[str]

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.features.ndim != 2 or len(self.features) == 0:
            raise FruitGradeError("dataset needs a nonempty (N, d) feature matrix")
        if len(self.labels) != len(self.features):
            raise FruitGradeError("one label per row required")
        if not np.all(np.isfinite(self.features)):
            raise FruitGradeError("dataset contains non-finite features")
        if self.labels.min() < 0 or self.labels.max() >= len(self.class_names):
            raise FruitGradeError("labels must index into class_names")

    @classmethod
    def from_strings(cls, features, labels: Sequence[str], names: Sequence[str]) -> "Dataset":
        """Map grade strings to contiguous ids in lexicographic order."""
        classes = sorted(set(labels))
        index = {c: i for i, c in enumerate(classes)}
        return cls(np.asarray(features), np.array([index[s] for s in labels]), list(names), classes)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def __len__(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class SplitPlan:
    train: np.ndarray
    validation: np.ndarray
    test: np.ndarray
    seed: int


def _stratified_order(labels: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Shuffle within each class, then interleave classes proportionally.

    Any prefix of the result holds every class in roughly its overall share.
    """
    keys = np.empty(len(labels))
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(len(idx))]
        keys[idx] = (np.arange(len(idx)) + rng.uniform(0.0, 1.0)) / len(idx)
    return np.lexsort((rng.permutation(len(labels)), keys))


def split_dataset(labels, seed: int = 0, fractions=(0.70, 0.15)) -> SplitPlan:
    """Stratified train / validation / test split of sizes floor(0.7N), floor(0.15N), remainder."""
    labels = np.asarray(labels)
    n = len(labels)
    if n < 10:
        raise TooFewSamples("split needs at least 10 samples")
    n_train = int(np.floor(fractions[0] * n + 1e-9))
    n_val = int(np.floor(fractions[1] * n + 1e-9))
    order = _stratified_order(labels, np.random.default_rng(seed))
    return SplitPlan(
        train=np.sort(order[:n_train]),
        validation=np.sort(order[n_train : n_train + n_val]),
        test=np.sort(order[n_train + n_val :]),
        seed=seed,
    )


def kfold_indices(n: int, k: int = 10, seed: int = 0) -> list[np.ndarray]:
    """Shuffled partition of ``range(n)`` into ``k`` folds whose sizes differ by at most 1."""
    if k < 2:
        raise ValueError("k must be >= 2")
    if n < k:
        raise TooFewSamples(f"{n} samples cannot fill {k} folds")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(fold) for fold in np.array_split(perm, k)]


@dataclass
class EvalReport:
    accuracy: float
    confusion: np.ndarray  # rows = true class, columns = predicted
    method: str = ""
    preset: str = ""
    selection: str = "none"
    class_names: list[str] = field(default_factory=list)
    fold_accuracies: Optional[list[float]] = None
    protocol: str = "resubstitution"

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "confusion": self.confusion.tolist(),
            "method": self.method,
            "preset": self.preset,
            "selection": self.selection,
            "class_names": self.class_names,
            "fold_accuracies": self.fold_accuracies,
            "protocol": self.protocol,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def table_row(self) -> str:
        return f"{self.method:<28}{self.preset:<16}{self.selection:<8}{100 * self.accuracy:>8.1f}"

    def to_table(self) -> str:
        header = f"{'Model':<28}{'Preset':<16}{'FS':<8}{'ACC(%)':>8}"
        return "\n".join([header, "-" * len(header), self.table_row()])


def confusion_matrix(y_true, y_pred, n_classes: int) -> np.ndarray:
    cm = np.zeros((n_classes, n_classes), dtype=int)
    np.add.at(cm, (np.asarray(y_true, dtype=int), np.asarray(y_pred, dtype=int)), 1)
    return cm


def accuracy_report(y_true, y_pred, n_classes: int, **meta) -> EvalReport:
    y_true = np.asarray(y_true, dtype=int)
    if len(y_true) == 0:
        raise FruitGradeError("cannot evaluate on an empty set")
    cm = confusion_matrix(y_true, y_pred, n_classes)
    return EvalReport(accuracy=float(np.trace(cm) / cm.sum()), confusion=cm, **meta)


def format_table(reports: Sequence[EvalReport]) -> str:
    header = f"{'Model':<28}{'Preset':<16}{'FS':<8}{'ACC(%)':>8}"
    return "\n".join([header, "-" * len(header)] + [r.table_row() for r in reports])
