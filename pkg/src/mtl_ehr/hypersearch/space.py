"""Search dimensions, the per-architecture search space and random sampling.

Every dimension has a "transformed" axis on which densities are fitted:
the raw value for uniform dimensions, the log for log-normal ones, the
exponent for log-uniform ones and the option index for choices.
"""
from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import ConfigError
from ..models.config import EncoderConfig
from ..training.config import TrainConfig


@dataclass(frozen=True)
class IntUniform:
    lo: int
    hi: int

    def draw(self, rng):
        return int(rng.integers(self.lo, self.hi + 1))

    def to_axis(self, v):
        return float(v)

    def from_axis(self, u):
        return int(min(max(round(u), self.lo), self.hi))

    def bounds(self):
        return self.lo - 0.5, self.hi + 0.5

    def contains(self, v):
        return isinstance(v, (int, np.integer)) and self.lo <= v <= self.hi


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def draw(self, rng):
        return float(rng.uniform(self.lo, self.hi))

    def to_axis(self, v):
        return float(v)

    def from_axis(self, u):
        return float(min(max(u, self.lo), self.hi))

    def bounds(self):
        return self.lo, self.hi

    def contains(self, v):
        return self.lo <= v <= self.hi


@dataclass(frozen=True)
class LogNormal:
    """``exp(Normal(mu, sigma))``; unbounded above zero."""

    mu: float
    sigma: float

    def draw(self, rng):
        return float(math.exp(rng.normal(self.mu, self.sigma)))

    def to_axis(self, v):
        return math.log(v)

    def from_axis(self, u):
        return float(math.exp(u))

    def bounds(self):
        return -math.inf, math.inf

    def contains(self, v):
        return v > 0 and math.isfinite(v)


@dataclass(frozen=True)
class LogUniform:
    """``exp(Uniform(lo, hi))``: the bounds are exponents."""

    lo: float
    hi: float

    def draw(self, rng):
        return float(math.exp(rng.uniform(self.lo, self.hi)))

    def to_axis(self, v):
        return math.log(v)

    def from_axis(self, u):
        return float(math.exp(min(max(u, self.lo), self.hi)))

    def bounds(self):
        return self.lo, self.hi

    def contains(self, v):
        return v > 0 and self.lo - 1e-12 <= math.log(v) <= self.hi + 1e-12


@dataclass(frozen=True)
class Choice:
    options: tuple

    def draw(self, rng):
        return self.options[int(rng.integers(len(self.options)))]

    def to_axis(self, v):
        return float(self.options.index(v))

    def from_axis(self, u):
        return self.options[int(u)]

    def contains(self, v):
        return v in self.options


SHARED = {
    "epochs": IntUniform(15, 30),
    "batch_size": IntUniform(4, 64),
    "learning_rate": LogNormal(-7.0, 0.5),
    "lr_decay": LogUniform(-2.3, 0.0),
    "lr_step": IntUniform(1, 25),
    "dropout": Uniform(0.0, 0.5),
    "weight_decay": Uniform(0.0, 1.0),
    "window": IntUniform(12, 168),
}
# the projection width; the transformer derives its width from heads instead
HIDDEN_SIZE = {"hidden_size": IntUniform(8, 256)}
GRU = {
    "bidirectional": Choice((False, True)),
    "num_layers": IntUniform(1, 3),
    "hidden_dim": IntUniform(16, 512),
    "fc_layers": IntUniform(0, 3),
    "pooling": Choice(("max", "avg", "last")),
    "fc_base": IntUniform(32, 512),
    "fc_growth": LogUniform(-1.1, 1.1),
}
TRANSFORMER = {
    "head_multiplier": IntUniform(4, 32),
    "intermediate_dim": IntUniform(32, 256),
    "num_heads": IntUniform(2, 24),
    "num_layers": IntUniform(1, 4),
    "use_cls": Choice((False, True)),
}
ARCHITECTURES = ("linear-concat", "gru", "transformer")


@dataclass(frozen=True)
class SearchSpace:
    """Named dimensions for one architecture; ``fixed`` values are not searched."""

    arch: str
    dims: dict
    fixed: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.arch not in ARCHITECTURES:
            raise ConfigError(f"unknown architecture {self.arch!r}")

    @property
    def names(self):
        return sorted(self.dims)

    def contains(self, params):
        return all(n in params and self.dims[n].contains(params[n]) for n in self.dims)

    def with_fixed(self, **values):
        dims = {k: v for k, v in self.dims.items() if k not in values}
        return replace(self, dims=dims, fixed={**self.fixed, **values})


def table_space(arch):
    """The full search space for one architecture."""
    dims = dict(SHARED)
    if arch == "gru":
        dims.update(HIDDEN_SIZE)
        dims.update(GRU)
    elif arch == "transformer":
        dims.update(TRANSFORMER)
    elif arch == "linear-concat":
        dims.update(HIDDEN_SIZE)
    return SearchSpace(arch, dims)


def sample(space: SearchSpace, seed):
    """Independent draw of every dimension, deterministic in ``seed``."""
    out = dict(space.fixed)
    for name in space.names:
        rng = np.random.default_rng([int(seed), zlib.crc32(name.encode())])
        out[name] = space.dims[name].draw(rng)
    return out


def to_configs(arch, params, base_encoder=None, base_train=None):
    """Map a flat parameter dict onto encoder and training configs."""
    enc = (base_encoder or EncoderConfig(kind=arch)).to_dict()
    train = (base_train or TrainConfig()).to_dict()
    enc["kind"] = arch
    p = dict(params)
    for key in ("epochs", "batch_size", "learning_rate", "lr_decay", "lr_step", "weight_decay"):
        if key in p:
            train[key] = p.pop(key)
    if "dropout" in p:
        enc["dropout"] = p.pop("dropout")
    if "window" in p:
        enc["input_window_hours"] = p.pop("window")
    if "hidden_size" in p:
        enc["embed_dim"] = p.pop("hidden_size")
    if arch == "transformer":
        heads = p.pop("num_heads", enc["num_heads"])
        mult = p.pop("head_multiplier", max(1, enc["embed_dim"] // heads))
        enc["num_heads"], enc["embed_dim"] = heads, heads * mult
        cls = p.pop("use_cls", enc["use_cls"])
        enc["use_cls"], enc["pooling"] = cls, "cls" if cls else "avg"
    elif arch == "linear-concat":
        enc["pooling"] = "last"
    for key in list(p):
        if key in enc:
            enc[key] = p.pop(key)
    if p:
        raise ConfigError(f"parameters {sorted(p)} have no place in a {arch} configuration")
    try:
        return EncoderConfig(**enc).validate(), TrainConfig(**train).validate()
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def to_params(enc: EncoderConfig, train: TrainConfig):
    """Inverse of ``to_configs`` over the table dimensions."""
    p = {k: getattr(train, k) for k in ("epochs", "batch_size", "learning_rate", "lr_decay",
                                        "lr_step", "weight_decay")}
    p["dropout"] = enc.dropout
    p["window"] = enc.input_window_hours
    if enc.kind == "transformer":
        p.update(head_multiplier=enc.embed_dim // enc.num_heads, intermediate_dim=enc.intermediate_dim,
                 num_heads=enc.num_heads, num_layers=enc.num_layers, use_cls=enc.use_cls)
    else:
        p["hidden_size"] = enc.embed_dim
    if enc.kind == "gru":
        p.update(bidirectional=enc.bidirectional, num_layers=enc.num_layers, hidden_dim=enc.hidden_dim,
                 fc_layers=enc.fc_layers, pooling=enc.pooling, fc_base=enc.fc_base,
                 fc_growth=enc.fc_growth)
    return p
