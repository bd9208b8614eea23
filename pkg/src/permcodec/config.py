"""Experiment configuration: a single versioned JSON document."""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path

from .core import DistortionMeasure, SourceModel, ValidationError

CONFIG_VERSION = 1

DEFAULTS = {
    "version": CONFIG_VERSION,
    "source": {"pmf": [0.5, 0.5]},
    "n": 6,
    "distortion": "hamming",
    "n_codewords": 4,
    "n_keys": 8,
    "cipher_kind": "I",
    "seed": 0,
    "trials": 200,
    "target_distortion": None,
    "analyses": {"leakage": True, "concentration": False, "rd_sweep": False},
    "leakage": {"Delta": None, "delta": 0.5, "ensemble_trials": 0, "key_grid": []},
    "concentration": {"q": 0.0625, "Delta": 16, "delta": 0.5, "trials": 200, "n_keys": None},
    "rd_sweep": {"slopes": [0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0]},
    "budgets": {"enumeration": 10**7, "pairs": 10**8},
}


def _merge(base, override, path="config"):
    if not isinstance(override, dict):
        raise ValidationError(f"{path} must be a JSON object")
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key not in base:
            raise ValidationError(f"unknown field {path}.{key}")
        if isinstance(base[key], dict) and key != "distortion":
            out[key] = _merge(base[key], value, f"{path}.{key}")
        else:
            out[key] = value
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated, fully resolved experiment settings (see :data:`DEFAULTS`)."""

    data: dict

    @classmethod
    def from_dict(cls, raw: dict | None = None, **overrides) -> "ExperimentConfig":
        raw = dict(raw or {})
        if raw.get("version", CONFIG_VERSION) != CONFIG_VERSION:
            raise ValidationError(f"unsupported config version {raw.get('version')!r}")
        data = _merge(DEFAULTS, raw)
        for k, v in overrides.items():
            if v is not None:
                data = _merge(data, {k: v})
        cfg = cls(data)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path, **overrides) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(raw, **overrides)

    def __getitem__(self, key):
        return self.data[key]

    @property
    def source(self) -> SourceModel:
        return SourceModel(self.data["source"]["pmf"])

    @property
    def distortion(self) -> DistortionMeasure:
        choice = self.data["distortion"]
        if choice == "hamming":
            return DistortionMeasure.hamming(self.source.alphabet_size)
        if isinstance(choice, dict) and set(choice) == {"table"}:
            return DistortionMeasure(choice["table"])
        raise ValidationError("distortion must be \"hamming\" or {\"table\": [[...]]}")

    @property
    def n(self) -> int:
        return int(self.data["n"])

    @property
    def M(self) -> int:
        return int(self.data["n_codewords"])

    @property
    def N(self) -> int:
        return int(self.data["n_keys"])

    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    @property
    def rate(self) -> float:
        return math.log(self.M) / self.n

    @property
    def key_rate(self) -> float:
        return math.log(self.N) / self.n

    def validate(self) -> None:
        d = self.data
        src = self.source
        dist = self.distortion
        if dist.source_alphabet_size != src.alphabet_size:
            raise ValidationError("distortion table rows must match the source alphabet")
        if not isinstance(d["n"], int) or d["n"] < 1:
            raise ValidationError("n must be a positive integer")
        for key in ("n_codewords", "n_keys", "trials"):
            if not isinstance(d[key], int) or d[key] < 1:
                raise ValidationError(f"{key} must be a positive integer")
        if not isinstance(d["seed"], int) or d["seed"] < 0:
            raise ValidationError("seed must be a nonnegative integer")
        if d["cipher_kind"] not in ("I", "II"):
            raise ValidationError("cipher_kind must be \"I\" or \"II\"")
        if d["cipher_kind"] == "II" and d["n_keys"] < 2:
            raise ValidationError("type II cipher needs n_keys >= 2")
        for key, value in d["budgets"].items():
            if not isinstance(value, (int, float)) or value <= 0:
                raise ValidationError(f"budgets.{key} must be positive")
        if d["leakage"]["delta"] <= 0:
            raise ValidationError("leakage.delta must be > 0")
        if d["leakage"]["Delta"] is not None and d["leakage"]["Delta"] <= 0:
            raise ValidationError("leakage.Delta must be > 0")

    def require_positive_margin(self) -> None:
        """Leakage experiments on the reversed system need ``R_s > R``."""
        if not self.key_rate > self.rate:
            raise ValidationError(
                f"key rate R_s = ln(N)/n = {self.key_rate:.6g} must exceed the compression "
                f"rate R = ln(M)/n = {self.rate:.6g} nats/symbol for leakage experiments; "
                f"raise n_keys above n_codewords"
            )

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)
