import csv

import numpy as np
import pytest
from pydantic import ValidationError

from fruitgrade import features, imgcore, segment, synth
from fruitgrade.synth import GradeSpec, SynthSpec


def test_corpus_counts(small_corpus):
    out, spec = small_corpus
    with open(out / "labels.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["filename", "grade"]
    assert len(rows) - 1 == 18 == len(list(out.glob("*.png")))
    assert sorted(r[1] for r in rows[1:]) == ["A"] * 6 + ["B"] * 6 + ["C"] * 6


def test_corpus_byte_identical(tmp_path):
    spec = synth.default_spec(samples_per_grade=2, seed=5)
    synth.generate_synthetic_corpus(spec, tmp_path / "a")
    synth.generate_synthetic_corpus(spec, tmp_path / "b")
    for f in sorted((tmp_path / "a").iterdir()):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_clean_grade_closure(small_corpus):
    out, spec = small_corpus
    for name, params in synth.draw_corpus(spec):
        if params.grade != "A":
            continue
        view = segment.fruit_view_from_image(imgcore.read_image(out / name))
        d = features.extract_all(view).as_dict()
        assert d["wrinkle_count"] == 0
        assert d["defect_ratio"] < 0.01


def test_scale_recovered(small_corpus):
    out, spec = small_corpus
    name, params = synth.draw_corpus(spec)[0]
    view = segment.fruit_view_from_image(imgcore.read_image(out / name))
    assert view.mm_per_pixel == pytest.approx(spec.frame_side_mm / spec.frame_inner_px)
    major = features.shape_features(features.region_geometry(view.mask), view.mm_per_pixel)[2]
    assert major == pytest.approx(params.length_mm, rel=0.03)


def test_spec_validation():
    with pytest.raises(ValidationError):
        SynthSpec(grades=[GradeSpec(name="A")])
    with pytest.raises(ValidationError):
        GradeSpec(name="A", defect_fraction=(0.2, 1.5))
    with pytest.raises(ValidationError):
        SynthSpec(grades=[GradeSpec(name="A"), GradeSpec(name="B")], colour="red")


def test_load_spec(tmp_path):
    spec = synth.default_spec(samples_per_grade=3, seed=9)
    (tmp_path / "s.json").write_text(spec.model_dump_json())
    assert synth.load_spec(tmp_path / "s.json") == spec


def test_truth_fractions_known():
    spec = synth.default_spec(samples_per_grade=4, seed=1)
    for _, params in synth.draw_corpus(spec):
        t = synth.truth_fractions(params, spec)
        if params.grade == "A":
            assert t["groove"] == 0 and t["defect"] == 0
        assert 0 <= t["groove"] < 1 and 0 <= t["defect"] < 1


def test_sample_params_lookup():
    spec = synth.default_spec(samples_per_grade=2)
    assert synth.sample_params(spec, 0) == synth.draw_corpus(spec)[0][1]
    assert synth.sample_params(spec, 99) is None


def test_render_scale_doubles_canvas():
    spec = synth.default_spec(samples_per_grade=1)
    params = synth.draw_corpus(spec)[0][1]
    a = synth.render_sample(params, spec)
    b = synth.render_sample(params, spec, scale=2.0)
    assert b.shape[0] == 2 * a.shape[0] and a.dtype == np.uint8
