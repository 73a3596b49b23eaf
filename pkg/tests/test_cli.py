import csv
import json

import numpy as np
import pytest

from fruitgrade import synth
from fruitgrade.cli import run_cli
from fruitgrade.features import FEATURE_NAMES


@pytest.fixture(scope="module")
def extracted(small_corpus, tmp_path_factory):
    out, spec = small_corpus
    work = tmp_path_factory.mktemp("cli")
    csv_path = work / "features.csv"
    assert run_cli(["extract", "--images", str(out), "--labels", str(out / "labels.csv"), "--out", str(csv_path)]) == 0
    return out, spec, work, csv_path


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_extract_shape(small_corpus, tmp_path):
    out, _ = small_corpus
    rows = read_rows(out / "labels.csv")[1:11]
    labels = tmp_path / "ten.csv"
    with open(labels, "w", newline="") as fh:
        csv.writer(fh).writerows([["filename", "grade"]] + rows)
    dest = tmp_path / "f.csv"
    assert run_cli(["extract", "--images", str(out), "--labels", str(labels), "--out", str(dest)]) == 0
    table = read_rows(dest)
    assert table[0] == list(FEATURE_NAMES) + ["label"]
    assert len(table) == 11 and all(len(r) == 60 for r in table)
    assert all(np.isfinite(float(v)) for r in table[1:] for v in r[:-1])


def test_extract_reports_failures(small_corpus, tmp_path, capsys):
    out, _ = small_corpus
    img_dir = tmp_path / "imgs"
    img_dir.mkdir()
    good = read_rows(out / "labels.csv")[1]
    (img_dir / good[0]).write_bytes((out / good[0]).read_bytes())
    (img_dir / "broken.png").write_bytes(b"not an image")
    labels = tmp_path / "labels.csv"
    labels.write_text(f"filename,grade\n{good[0]},{good[1]}\nbroken.png,B\nmissing.png,C\n")
    dest = tmp_path / "f.csv"
    code = run_cli(["extract", "--images", str(img_dir), "--labels", str(labels), "--out", str(dest)])
    err = capsys.readouterr().err
    assert code == 2
    assert "broken.png" in err and "missing.png" in err
    assert len(read_rows(dest)) == 2


def test_extract_parallel_matches_serial(small_corpus, tmp_path):
    out, _ = small_corpus
    base = ["extract", "--images", str(out), "--labels", str(out / "labels.csv")]
    assert run_cli(base + ["--out", str(tmp_path / "a.csv")]) == 0
    assert run_cli(base + ["--out", str(tmp_path / "b.csv"), "--jobs", "2"]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


@pytest.mark.parametrize(
    "argv",
    [[], ["frobnicate"], ["train", "--in", "x.csv"], ["train", "--in", "x", "--out", "y", "--model-preset", "forest"]],
)
def test_usage_errors(argv, capsys):
    assert run_cli(argv) == 1
    assert "usage" in capsys.readouterr().err.lower()


def test_help_exits_zero(capsys):
    assert run_cli(["--help"]) == 0


def test_missing_input_names_file(tmp_path, capsys):
    missing = tmp_path / "nope.csv"
    code = run_cli(["train", "--in", str(missing), "--model-preset", "tree-medium", "--out", str(tmp_path / "m.json")])
    assert code == 2
    assert "nope.csv" in capsys.readouterr().err


@pytest.mark.parametrize("method", ["pca", "cfs"])
def test_select_writes_transform(extracted, method):
    _, _, work, csv_path = extracted
    dest = work / f"{method}.json"
    assert run_cli(["select", "--in", str(csv_path), "--method", method, "--out", str(dest)]) == 0
    doc = json.loads(dest.read_text())
    assert doc["method"] == method and doc["input_names"] == list(FEATURE_NAMES)


def test_train_evaluate_memorizes(extracted, capsys):
    _, _, work, csv_path = extracted
    model = work / "complex.json"
    argv = ["train", "--in", str(csv_path), "--model-preset", "tree-complex", "--out", str(model), "--seed", "0"]
    assert run_cli(argv) == 0
    report = work / "report.json"
    assert run_cli(["evaluate", "--model", str(model), "--in", str(csv_path), "--json", str(report)]) == 0
    assert json.loads(report.read_text())["accuracy"] == 1.0
    assert "100.0" in capsys.readouterr().out


def test_train_with_transform_and_cv(extracted):
    _, _, work, csv_path = extracted
    transform = work / "t.json"
    model = work / "knn.json"
    assert run_cli(["select", "--in", str(csv_path), "--method", "cfs", "--out", str(transform)]) == 0
    argv = ["train", "--in", str(csv_path), "--transform", str(transform), "--model-preset", "knn-weighted"]
    assert run_cli(argv + ["--out", str(model), "--seed", "1"]) == 0
    report = work / "cv.json"
    assert run_cli(["evaluate", "--model", str(model), "--in", str(csv_path), "--cv", "3", "--json", str(report)]) == 0
    doc = json.loads(report.read_text())
    assert len(doc["fold_accuracies"]) == 3 and doc["protocol"] == "3-fold CV"


def test_train_is_idempotent(extracted):
    _, _, work, csv_path = extracted
    base = ["train", "--in", str(csv_path), "--model-preset", "ann-lm", "--selection", "pca", "--seed", "2"]
    assert run_cli(base + ["--out", str(work / "a.json")]) == 0
    assert run_cli(base + ["--out", str(work / "b.json")]) == 0
    assert (work / "a.json").read_bytes() == (work / "b.json").read_bytes()


def test_predict_reproduces_training_accuracy(extracted, capsys):
    out, spec, work, csv_path = extracted
    model = work / "medium.json"
    argv = ["train", "--in", str(csv_path), "--model-preset", "tree-medium", "--selection", "cfs"]
    assert run_cli(argv + ["--out", str(model)]) == 0
    report = work / "train.json"
    assert run_cli(["evaluate", "--model", str(model), "--in", str(csv_path), "--json", str(report)]) == 0
    acc = json.loads(report.read_text())["accuracy"]

    corpus = synth.draw_corpus(spec)
    capsys.readouterr()
    assert run_cli(["predict", "--model", str(model)] + [str(out / name) for name, _ in corpus]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    predicted = [line.split("\t")[1] for line in lines]
    truth = [p.grade for _, p in corpus]
    assert np.mean([a == b for a, b in zip(predicted, truth)]) == acc


def test_predict_smooth_grade_a(extracted, tmp_path, capsys):
    _, spec, work, csv_path = extracted
    model = work / "a_check.json"
    assert run_cli(["train", "--in", str(csv_path), "--model-preset", "tree-medium", "--out", str(model)]) == 0
    # a fresh grade-A fruit that was not in the training corpus
    fresh = synth.default_spec(samples_per_grade=1, seed=777)
    name, params = synth.draw_corpus(fresh)[0]
    assert params.grade == "A" and not params.grooves and not params.blobs
    from fruitgrade.imgcore import write_image

    write_image(tmp_path / name, synth.render_sample(params, fresh))
    capsys.readouterr()
    assert run_cli(["predict", "--model", str(model), str(tmp_path / name)]) == 0
    assert capsys.readouterr().out.strip().endswith("\tA")


def test_predict_bad_image(extracted, tmp_path, capsys):
    _, _, work, csv_path = extracted
    model = work / "p.json"
    assert run_cli(["train", "--in", str(csv_path), "--model-preset", "tree-simple", "--out", str(model)]) == 0
    bad = tmp_path / "blank.png"
    from fruitgrade.imgcore import write_image

    write_image(bad, np.full((40, 40, 3), 255, np.uint8))
    assert run_cli(["predict", "--model", str(model), str(bad)]) == 2
    assert "blank.png" in capsys.readouterr().err


def test_synth_command(tmp_path):
    spec = synth.default_spec(samples_per_grade=2, seed=3)
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(spec.model_dump_json())
    assert run_cli(["synth", "--spec", str(spec_path), "--out", str(tmp_path / "c")]) == 0
    assert len(read_rows(tmp_path / "c" / "labels.csv")) == 7


def test_synth_bad_spec(tmp_path, capsys):
    spec_path = tmp_path / "spec.json"
    spec_path.write_text('{"grades": []}')
    assert run_cli(["synth", "--spec", str(spec_path), "--out", str(tmp_path / "c")]) == 2
    assert "spec.json" in capsys.readouterr().err


def test_bad_config_is_data_error(extracted, tmp_path, capsys):
    out, _, _, _ = extracted
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{"unknown_key": 1}')
    argv = ["extract", "--images", str(out), "--labels", str(out / "labels.csv"), "--out", str(tmp_path / "f.csv")]
    assert run_cli(argv + ["--config", str(cfg)]) == 2
    assert "cfg.json" in capsys.readouterr().err


def test_hidden_size_from_config(extracted, tmp_path):
    _, _, _, csv_path = extracted
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{"hidden": 3, "preset": "ann-br"}')
    model = tmp_path / "m.json"
    assert run_cli(["train", "--in", str(csv_path), "--config", str(cfg), "--out", str(model)]) == 0
    assert json.loads(model.read_text())["model"]["n_hidden"] == 3
