"""Experiment configuration and its canonical hash.

Config files are JSON; see ``hashing`` for the canonical form used to
hash them.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from typing import Optional

from .data.dataset import SubsampleSpec
from .errors import ConfigError
from .hashing import canonical_json, config_hash
from .models.config import EncoderConfig, preset
from .tasks.specs import REPORTED_CATEGORIES, check_category
from .training.config import TRAIN_PRESETS, TrainConfig

REGIME_KINDS = ("ST", "MT", "PRETRAIN-OMIT", "FTD", "FTF")


def master_seed(default=0):
    """Master seed from ``MTLB_SEED`` when set."""
    raw = os.environ.get("MTLB_SEED")
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"MTLB_SEED must be an integer, got {raw!r}") from None


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str
    output: str
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    categories: tuple = REPORTED_CATEGORIES
    regime: str = "MT"
    task: Optional[str] = None
    subsample: SubsampleSpec = field(default_factory=SubsampleSpec)
    seeds: tuple = (0,)

    def validate(self):
        self.encoder.validate()
        self.train.validate()
        for c in self.categories:
            check_category(c)
        if self.regime not in REGIME_KINDS:
            raise ConfigError(f"regime must be one of {REGIME_KINDS}, got {self.regime!r}")
        if self.regime != "MT":
            if self.task is None:
                raise ConfigError(f"regime {self.regime} needs a task")
            check_category(self.task)
            if self.task not in self.categories:
                raise ConfigError(f"task {self.task} is not in the suite {list(self.categories)}")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        return self

    def to_dict(self):
        return {
            "dataset": self.dataset,
            "output": self.output,
            "encoder": self.encoder.to_dict(),
            "train": self.train.to_dict(),
            "categories": list(self.categories),
            "regime": self.regime,
            "task": self.task,
            "subsample": {"mode": self.subsample.mode, "fraction": self.subsample.fraction,
                          "seed": self.subsample.seed},
            "seeds": list(self.seeds),
        }

    def hash(self):
        return config_hash(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        known = {"dataset", "output", "encoder", "train", "categories", "regime", "task",
                 "subsample", "seeds", "preset"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        for key in ("dataset", "output"):
            if key not in d:
                raise ConfigError(f"config is missing {key!r}")
        name = d.pop("preset", None)
        enc = preset(name) if name else EncoderConfig()
        train = TRAIN_PRESETS.get(name, TrainConfig()) if name else TrainConfig()
        try:
            if "encoder" in d:
                enc = EncoderConfig.from_dict({**enc.to_dict(), **d.pop("encoder")})
            if "train" in d:
                train = TrainConfig.from_dict({**train.to_dict(), **d.pop("train")})
            sub = SubsampleSpec(**d.pop("subsample", {}))
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        seeds = d.pop("seeds", [0])
        if isinstance(seeds, int):
            seeds = list(range(seeds))
        cfg = cls(encoder=enc, train=train, subsample=sub, seeds=tuple(int(s) for s in seeds),
                  categories=tuple(d.pop("categories", REPORTED_CATEGORIES)), **d)
        return cfg.validate()


def load_config(path):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return ExperimentConfig.from_dict(raw)


__all__ = ["ExperimentConfig", "REGIME_KINDS", "canonical_json", "config_hash", "load_config",
           "master_seed", "replace"]
