import json

import pytest

from fruitgrade.config import PipelineConfig, load_config
from fruitgrade.errors import FruitGradeError


def test_defaults_and_override():
    cfg = load_config(None, selection="cfs", seed=None)
    assert cfg.selection == "cfs" and cfg.seed == 0
    assert cfg.extraction().glcm_levels == 8
    assert cfg.policy().sat_max == 0.15


def test_file_then_flags(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"preset": "knn-cosine", "wrinkle_h": 12, "seed": 4}))
    cfg = load_config(path, seed=9)
    assert (cfg.preset, cfg.wrinkle_h, cfg.seed) == ("knn-cosine", 12, 9)


@pytest.mark.parametrize(
    "doc",
    [{"bogus": 1}, {"sat_max": 2}, {"preset": "forest"}, {"glcm_offsets": [[0, 0]]}, {"selection": "lasso"}],
)
def test_invalid_config_rejected(tmp_path, doc):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(FruitGradeError):
        load_config(path)


def test_round_trip_json():
    cfg = PipelineConfig(glcm_offsets=[(1, 0)], mm_per_pixel=0.2)
    assert PipelineConfig.model_validate_json(cfg.model_dump_json()) == cfg
