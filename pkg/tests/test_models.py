import numpy as np
import pytest

from fruitgrade.errors import FruitGradeError
from fruitgrade.learn import (
    PRESETS,
    Dataset,
    SelectionConfig,
    cross_validate,
    evaluate,
    fit_pipeline,
    holdout_evaluate,
    kfold_indices,
    load_model,
    save_model,
)
from fruitgrade.learn.protocol import accuracy_report


def blob_dataset(n_per=30, d=6, seed=0):
    rng = np.random.default_rng(seed)
    y = np.repeat([0, 1, 2], n_per)
    centers = rng.normal(0, 3, (3, d))
    x = centers[y] + rng.normal(size=(3 * n_per, d))
    x[:, -1] *= 1000  # scale spread that standardization must absorb
    return Dataset(x, y, [f"f{i}" for i in range(d)], ["A", "B", "C"])


def test_preset_table():
    assert set(PRESETS) == {
        "ann-lm", "ann-br", "svm-linear", "svm-poly2", "svm-poly3", "svm-rbf",
        "tree-simple", "tree-medium", "tree-complex", "knn-weighted", "knn-cosine", "knn-cubic",
    }  # fmt: skip
    assert PRESETS["tree-medium"]["max_splits"] == 20
    assert PRESETS["knn-weighted"]["k"] == 10


@pytest.mark.parametrize("preset", sorted(PRESETS))
def test_every_preset_fits_and_round_trips(preset, tmp_path):
    data = blob_dataset()
    model = fit_pipeline(data, preset, SelectionConfig("cfs"), seed=1)
    save_model(model, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    assert np.array_equal(back.predict(data.features), model.predict(data.features))
    assert evaluate(model, data).accuracy >= 0.9
    assert (model.standardizer is None) == (model.kind == "tree")


def test_cv_is_mean_of_fold_accuracies():
    data = blob_dataset(seed=2)
    folds = kfold_indices(len(data), 5, seed=3)
    rep = cross_validate(data, "knn-cubic", SelectionConfig("pca"), folds=folds, seed=3)
    manual = []
    for fold in folds:
        train = np.setdiff1d(np.arange(len(data)), fold)
        m = fit_pipeline(data, "knn-cubic", SelectionConfig("pca"), 3, rows=train)
        manual.append(accuracy_report(data.labels[fold], m.predict(data.features[fold]), 3).accuracy)
    assert rep.accuracy == pytest.approx(np.mean(manual), abs=1e-15)
    assert rep.fold_accuracies == manual
    assert rep.confusion.sum() == len(data)


def test_holdout_protocol():
    rep = holdout_evaluate(blob_dataset(seed=4), "ann-lm", seed=0)
    assert rep.confusion.sum() == 90 - 63 - 13
    assert rep.accuracy >= 0.9


def test_unknown_preset():
    with pytest.raises(FruitGradeError):
        fit_pipeline(blob_dataset(), "forest")


def test_evaluate_remaps_class_names():
    data = blob_dataset(seed=5)
    model = fit_pipeline(data, "tree-medium")
    keep = data.labels > 0
    sub = Dataset(data.features[keep], data.labels[keep] - 1, data.names, ["B", "C"])
    assert evaluate(model, sub).accuracy == 1.0


def test_evaluate_unknown_grade():
    data = blob_dataset(seed=6)
    model = fit_pipeline(data, "tree-simple")
    other = Dataset(data.features, data.labels, data.names, ["A", "B", "Z"])
    with pytest.raises(FruitGradeError):
        evaluate(model, other)


def test_load_rejects_garbage(tmp_path):
    (tmp_path / "m.json").write_text('{"format_version": 1}')
    with pytest.raises(FruitGradeError):
        load_model(tmp_path / "m.json")
    (tmp_path / "v.json").write_text('{"format_version": 99}')
    with pytest.raises(FruitGradeError):
        load_model(tmp_path / "v.json")


def test_fit_is_deterministic(tmp_path):
    data = blob_dataset(seed=7)
    for preset in ("ann-br", "svm-rbf"):
        save_model(fit_pipeline(data, preset, seed=3), tmp_path / "a.json")
        save_model(fit_pipeline(data, preset, seed=3), tmp_path / "b.json")
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
