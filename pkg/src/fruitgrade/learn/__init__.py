"""Classifiers and the evaluation protocol."""
from .knn import KnnModel, knn_fit
from .mlp import MlpModel, levenberg_marquardt, mlp_fit
from .models import (
    PRESETS,
    SelectionConfig,
    TrainedModel,
    cross_validate,
    evaluate,
    fit_pipeline,
    holdout_evaluate,
    load_model,
    save_model,
)
from .protocol import Dataset, EvalReport, SplitPlan, kfold_indices, split_dataset
from .svm import SvmModel, svm_fit
from .tree import DecisionTreeModel, tree_fit

__all__ = [
    "PRESETS",
    "Dataset",
    "DecisionTreeModel",
    "EvalReport",
    "KnnModel",
    "MlpModel",
    "SelectionConfig",
    "SplitPlan",
    "SvmModel",
    "TrainedModel",
    "cross_validate",
    "evaluate",
    "fit_pipeline",
    "holdout_evaluate",
    "kfold_indices",
    "knn_fit",
    "levenberg_marquardt",
    "load_model",
    "mlp_fit",
    "save_model",
    "split_dataset",
    "svm_fit",
    "tree_fit",
]
