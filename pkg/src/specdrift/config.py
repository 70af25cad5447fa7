"""Strict JSON experiment configuration."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .dataset import DriftSpec, generate, read_bts, split_by_subject
from .encoder import EncoderConfig
from .errors import ConfigurationError, ValidationError
from .fbam import FbamConfig
from .trainer import TrainConfig

_DATA_KEYS = {"spec", "seed", "path"}
_SPLIT_KEYS = {"ratios", "explicit", "seed", "mode"}


def strict(cls, data, where):
    """Instantiate dataclass ``cls`` from ``data``, rejecting unknown keys."""
    if not isinstance(data, dict):
        raise ValidationError(f"{where}: expected an object, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ValidationError(f"{where}: unknown keys {sorted(unknown)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ValidationError(f"{where}: {exc}") from None


def _check_keys(data, allowed, where):
    if not isinstance(data, dict):
        raise ValidationError(f"{where}: expected an object")
    unknown = set(data) - allowed
    if unknown:
        raise ValidationError(f"{where}: unknown keys {sorted(unknown)}")


@dataclass
class ExperimentConfig:
    """One experiment: data source, split policy, model, optimiser, output directory.

    ``data`` holds either ``{"spec": {...DriftSpec...}, "seed": n}`` or
    ``{"path": "file.btsd"}``. ``encoder`` may omit ``n_channels``,
    ``seq_len`` and ``num_classes``, which are then taken from the data; its
    ``fbam`` entry configures FBAM or TSAM and ``scln_alpha`` sets SCLN.
    """

    data: dict
    split: dict = field(default_factory=lambda: {"ratios": [0.6, 0.2, 0.2], "seed": 0})
    encoder: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    output_dir: str = "runs"

    def __post_init__(self):
        _check_keys(self.data, _DATA_KEYS, "data")
        if ("spec" in self.data) == ("path" in self.data):
            raise ValidationError("data: give exactly one of 'spec' or 'path'")
        if "spec" in self.data:
            strict(DriftSpec, self.data["spec"], "data.spec")
        _check_keys(self.split, _SPLIT_KEYS, "split")
        fbam = self.encoder.get("fbam", {})
        strict(FbamConfig, fbam, "encoder.fbam")
        enc_names = {f.name for f in dataclasses.fields(EncoderConfig)}
        unknown = set(self.encoder) - enc_names
        if unknown:
            raise ValidationError(f"encoder: unknown keys {sorted(unknown)}")
        self.train_config()

    @classmethod
    def from_dict(cls, data):
        return strict(cls, data, "config")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            try:
                payload = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(payload)

    def load_data(self):
        if "path" in self.data:
            return read_bts(self.data["path"])
        return generate(strict(DriftSpec, self.data["spec"], "data.spec"), self.data.get("seed", 0))

    def split_plan(self, batch):
        split = self.split
        if ("ratios" in split) == ("explicit" in split):
            raise ConfigurationError("split: give exactly one of 'ratios' or 'explicit'")
        return split_by_subject(
            batch.s,
            ratios=split.get("ratios"),
            explicit=split.get("explicit"),
            seed=split.get("seed", 0),
            mode=split.get("mode", "cross_subject"),
        )

    def encoder_config(self, batch):
        values = {"n_channels": batch.X.shape[2], "seq_len": batch.X.shape[1], "num_classes": batch.num_classes}
        values.update(self.encoder)
        values["fbam"] = strict(FbamConfig, self.encoder.get("fbam", {}), "encoder.fbam")
        return strict(EncoderConfig, values, "encoder")

    def train_config(self):
        return strict(TrainConfig, self.train, "train")

    def to_dict(self):
        return dataclasses.asdict(self)
