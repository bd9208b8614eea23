import json
import math

import pytest

from permcodec.config import DEFAULTS, ExperimentConfig
from permcodec.core import ValidationError


def test_defaults_resolve():
    cfg = ExperimentConfig.from_dict({})
    assert cfg.n == DEFAULTS["n"] and cfg.M == 4 and cfg.N == 8
    assert cfg.rate == pytest.approx(math.log(4) / 6)


@pytest.mark.parametrize("raw", [
    {"colour": 1},
    {"leakage": {"Delta": 4, "extra": 1}},
    {"version": 2},
    {"n": 0},
    {"n_keys": 1, "cipher_kind": "II"},
    {"cipher_kind": "III"},
    {"seed": -1},
    {"source": {"pmf": [0.5, 0.6]}},
    {"distortion": {"table": [[0, 1, 1], [1, 0, 1], [1, 1, 0]]}},
    {"budgets": {"pairs": 0}},
])
def test_rejects_bad_fields(raw):
    with pytest.raises(ValidationError):
        ExperimentConfig.from_dict(raw)


def test_custom_distortion_table():
    cfg = ExperimentConfig.from_dict({"distortion": {"table": [[0, 2], [3, 0]]}})
    assert cfg.distortion.matrix[1, 0] == 3


def test_overrides_and_load(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"n": 5, "seed": 3}))
    cfg = ExperimentConfig.load(p, seed=9)
    assert cfg.n == 5 and cfg.seed == 9
    p.write_text("{not json")
    with pytest.raises(ValidationError):
        ExperimentConfig.load(p)


def test_positive_margin_is_strict():
    with pytest.raises(ValidationError, match="must exceed"):
        ExperimentConfig.from_dict({"n_keys": 4, "n_codewords": 4}).require_positive_margin()
    ExperimentConfig.from_dict({"n_keys": 5, "n_codewords": 4}).require_positive_margin()


def test_round_trip_dict():
    cfg = ExperimentConfig.from_dict({"n": 7})
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg
