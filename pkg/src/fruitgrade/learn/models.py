"""Named classifier presets, the fitted pipeline, persistence and evaluation protocols."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .. import select as fs
from ..errors import FruitGradeError
from .knn import KnnModel, knn_fit
from .mlp import MlpModel, mlp_fit
from .protocol import Dataset, EvalReport, accuracy_report, kfold_indices, split_dataset
from .svm import SvmModel, svm_fit
from .tree import DecisionTreeModel, tree_fit

FORMAT_VERSION = 1

PRESETS: dict[str, dict[str, Any]] = {
    "ann-lm": {"kind": "mlp", "method": "levenberg_marquardt", "hidden": 10, "label": "ANN Levenberg-Marquardt"},
    "ann-br": {"kind": "mlp", "method": "bayesian_regularization", "hidden": 10, "label": "ANN Bayesian Regularization"},
    "svm-linear": {"kind": "svm", "kernel": "linear", "C": 1.0, "label": "SVM linear kernel"},
    "svm-poly2": {"kind": "svm", "kernel": "poly", "degree": 2, "C": 1.0, "label": "SVM 2nd-degree kernel"},
    "svm-poly3": {"kind": "svm", "kernel": "poly", "degree": 3, "C": 1.0, "label": "SVM 3rd-degree kernel"},
    "svm-rbf": {"kind": "svm", "kernel": "gaussian", "C": 1.0, "label": "SVM gaussian kernel"},
    "tree-simple": {"kind": "tree", "max_splits": 4, "label": "Tree simple (4 splits)"},
    "tree-medium": {"kind": "tree", "max_splits": 20, "label": "Tree medium (20 splits)"},
    "tree-complex": {"kind": "tree", "max_splits": 100, "label": "Tree complex (100 splits)"},
    "knn-weighted": {"kind": "knn", "k": 10, "metric": "euclidean", "weighting": "squared_inverse", "label": "kNN weighted"},
    "knn-cosine": {"kind": "knn", "k": 10, "metric": "cosine", "weighting": "uniform", "label": "kNN cosine"},
    "knn-cubic": {"kind": "knn", "k": 10, "metric": "minkowski3", "weighting": "uniform", "label": "kNN cubic"},
}


@dataclass(frozen=True)
class SelectionConfig:
    method: str = "none"  # none | pca | cfs
    pca_target: float = 0.95
    cfs_stall: int = 5

    def fit(self, x, y, names=()) -> fs.SelectionTransform:
        return fs.fit_selection(x, y, self.method, self.pca_target, self.cfs_stall, names)

    def to_dict(self) -> dict:
        return {"method": self.method, "pca_target": self.pca_target, "cfs_stall": self.cfs_stall}


@dataclass
class TrainedModel:
    kind: str
    preset: str
    classifier: Any
    selection: fs.SelectionTransform
    standardizer: Optional[fs.Standardizer]
    class_names: list[str]
    feature_names: list[str]
    config: dict = field(default_factory=dict)
    seed: int = 0

    def transform(self, x) -> np.ndarray:
        z = self.selection.apply(np.atleast_2d(np.asarray(x, dtype=np.float64)))
        return self.standardizer.apply(z) if self.standardizer is not None else z

    def predict(self, x) -> np.ndarray:
        return self.classifier.predict(self.transform(x))

    def predict_labels(self, x) -> list[str]:
        return [self.class_names[i] for i in self.predict(x)]

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "kind": self.kind,
            "preset": self.preset,
            "selection": self.selection.to_dict(),
            "standardizer": self.standardizer.to_dict() if self.standardizer is not None else None,
            "model": self.classifier.to_dict(),
            "class_names": self.class_names,
            "feature_names": self.feature_names,
            "config": self.config,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainedModel":
        if d.get("format_version") != FORMAT_VERSION:
            raise FruitGradeError(f"unsupported model format version {d.get('format_version')!r}")
        loaders = {
            "tree": DecisionTreeModel.from_dict,
            "knn": KnnModel.from_dict,
            "svm": SvmModel.from_dict,
            "mlp": MlpModel.from_dict,
        }
        kind = d["kind"]
        if kind not in loaders:
            raise FruitGradeError(f"unknown model kind {kind!r}")
        std = d.get("standardizer")
        return cls(
            kind=kind,
            preset=d["preset"],
            classifier=loaders[kind](d["model"]),
            selection=fs.SelectionTransform.from_dict(d["selection"]),
            standardizer=fs.Standardizer.from_dict(std) if std else None,
            class_names=list(d["class_names"]),
            feature_names=list(d["feature_names"]),
            config=d.get("config", {}),
            seed=int(d.get("seed", 0)),
        )


def save_model(model: TrainedModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=1), encoding="utf-8")


def load_model(path) -> TrainedModel:
    try:
        return TrainedModel.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise FruitGradeError(f"{path}: malformed model file ({exc})") from None


def _fit_classifier(spec: dict, x, y, n_classes: int, seed: int, val=None):
    kind = spec["kind"]
    if kind == "tree":
        return tree_fit(x, y, spec["max_splits"], n_classes)
    if kind == "knn":
        return knn_fit(x, y, spec["k"], spec["metric"], spec["weighting"], n_classes)
    if kind == "svm":
        return svm_fit(x, y, spec["kernel"], spec.get("degree", 3), spec.get("gamma"), spec["C"], n_classes=n_classes)
    if kind == "mlp":
        vx, vy = val if val is not None else (None, None)
        return mlp_fit(x, y, vx, vy, spec["hidden"], spec["method"], seed, spec.get("max_iter", 200), n_classes)
    raise ValueError(f"unknown model kind {kind!r}")


def fit_pipeline(
    data: Dataset,
    preset: str,
    selection: SelectionConfig | fs.SelectionTransform = SelectionConfig(),
    seed: int = 0,
    rows: Optional[np.ndarray] = None,
    overrides: Optional[dict] = None,
) -> TrainedModel:
    """Fit selection, scaling and classifier on ``rows`` of ``data`` (all rows by default).

    Trees see raw (selected) features; every other model sees standardized
    ones. Networks hold out a stratified 15/85 share of the training rows for
    validation stopping.
    """
    if preset not in PRESETS:
        raise FruitGradeError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
    spec = {**PRESETS[preset], **(overrides or {})}
    rows = np.arange(len(data)) if rows is None else np.asarray(rows)
    x, y = data.features[rows], data.labels[rows]

    val = None
    fit_rows = np.arange(len(rows))
    if spec["kind"] == "mlp" and len(rows) >= 10:
        plan = split_dataset(y, seed, fractions=(0.70 / 0.85, 0.15 / 0.85))
        fit_rows = np.sort(np.concatenate([plan.train, plan.test]))
        val = plan.validation

    if isinstance(selection, fs.SelectionTransform):
        transform = selection
        sel_cfg = {"method": transform.method, "prefit": True}
    else:
        transform = selection.fit(x[fit_rows], y[fit_rows], data.names)
        sel_cfg = selection.to_dict()
    z = transform.apply(x)

    standardizer = None
    if spec["kind"] != "tree":
        standardizer = fs.fit_standardizer(z[fit_rows])
        z = standardizer.apply(z)

    val_data = (z[val], y[val]) if val is not None else None
    clf = _fit_classifier(spec, z[fit_rows], y[fit_rows], data.n_classes, seed, val_data)
    return TrainedModel(
        kind=spec["kind"],
        preset=preset,
        classifier=clf,
        selection=transform,
        standardizer=standardizer,
        class_names=list(data.class_names),
        feature_names=list(data.names),
        config={"preset": spec, "selection": sel_cfg},
        seed=seed,
    )


def evaluate(model: TrainedModel, data: Dataset, protocol: str = "resubstitution") -> EvalReport:
    """Apply the model's embedded pipeline to ``data`` and score it."""
    if list(data.class_names) != list(model.class_names):
        remap = {c: i for i, c in enumerate(model.class_names)}
        missing = [c for c in data.class_names if c not in remap]
        if missing:
            raise FruitGradeError(f"grades unknown to the model: {', '.join(missing)}")
        y = np.array([remap[data.class_names[i]] for i in data.labels])
    else:
        y = data.labels
    pred = model.predict(data.features)
    return accuracy_report(
        y,
        pred,
        len(model.class_names),
        method=PRESETS.get(model.preset, {}).get("label", model.kind),
        preset=model.preset,
        selection=model.selection.method,
        class_names=list(model.class_names),
        protocol=protocol,
    )


def cross_validate(
    data: Dataset,
    preset: str,
    selection: SelectionConfig = SelectionConfig(),
    k: int = 10,
    seed: int = 0,
    folds: Optional[list[np.ndarray]] = None,
) -> EvalReport:
    """k-fold CV; selection is refit inside every fold. Accuracy is the fold mean."""
    folds = folds if folds is not None else kfold_indices(len(data), k, seed)
    confusion = np.zeros((data.n_classes, data.n_classes), dtype=int)
    accs = []
    everything = np.arange(len(data))
    for fold in folds:
        train = np.setdiff1d(everything, fold)
        model = fit_pipeline(data, preset, selection, seed, rows=train)
        pred = model.predict(data.features[fold])
        rep = accuracy_report(data.labels[fold], pred, data.n_classes)
        confusion += rep.confusion
        accs.append(rep.accuracy)
    return EvalReport(
        accuracy=float(np.mean(accs)),
        confusion=confusion,
        method=PRESETS[preset]["label"],
        preset=preset,
        selection=selection.method,
        class_names=list(data.class_names),
        fold_accuracies=accs,
        protocol=f"{len(folds)}-fold CV",
    )


def holdout_evaluate(
    data: Dataset, preset: str, selection: SelectionConfig = SelectionConfig(), seed: int = 0
) -> EvalReport:
    """70/15/15 protocol: fit on train, stop on validation, score on test."""
    plan = split_dataset(data.labels, seed)
    spec = PRESETS[preset]
    x, y = data.features, data.labels
    transform = selection.fit(x[plan.train], y[plan.train], data.names)
    z = transform.apply(x)
    standardizer = None
    if spec["kind"] != "tree":
        standardizer = fs.fit_standardizer(z[plan.train])
        z = standardizer.apply(z)
    clf = _fit_classifier(
        spec, z[plan.train], y[plan.train], data.n_classes, seed, (z[plan.validation], y[plan.validation])
    )
    pred = clf.predict(z[plan.test])
    return accuracy_report(
        y[plan.test],
        pred,
        data.n_classes,
        method=spec["label"],
        preset=preset,
        selection=selection.method,
        class_names=list(data.class_names),
        protocol="70/15/15 holdout (test)",
    )
