from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Optional

from ..errors import ConfigError


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 18
    batch_size: int = 254
    learning_rate: float = 1e-3
    lr_decay: float = 1.0
    lr_step: int = 25
    weight_decay: float = 0.0
    seed: int = 0
    regression_weight: float = 1.0
    clip_norm: Optional[float] = 5.0
    fts_max_len: int = 16
    select: str = "best-tune"
    # fine-tuning regimes may override the shared learning rate
    finetune_learning_rate: Optional[float] = None
    eval_seed: int = 0
    eval_every: int = 1

    def validate(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be positive")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning rate must be positive, got {self.learning_rate}")
        if self.finetune_learning_rate is not None and not self.finetune_learning_rate > 0:
            raise ConfigError("fine-tuning learning rate must be positive")
        if not 0 < self.lr_decay <= 1.0 or self.lr_step < 1:
            raise ConfigError("lr_decay must lie in (0, 1] and lr_step be >= 1")
        if self.weight_decay < 0 or self.regression_weight < 0:
            raise ConfigError("weight decay and regression weight must be non-negative")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ConfigError("clip_norm must be positive or None")
        if self.select not in ("best-tune", "final"):
            raise ConfigError(f"select must be 'best-tune' or 'final', got {self.select!r}")
        if self.fts_max_len < 1 or self.eval_every < 1:
            raise ConfigError("fts_max_len and eval_every must be >= 1")
        return self

    def lr_at(self, epoch, finetune=False):
        """Step-decayed learning rate for a 0-based epoch."""
        base = self.finetune_learning_rate if finetune and self.finetune_learning_rate else self.learning_rate
        return base * self.lr_decay ** (epoch // self.lr_step)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown training settings {sorted(extra)}")
        return cls(**d).validate()


TRAIN_PRESETS = {
    "gru-paper": TrainConfig(epochs=18, batch_size=254, learning_rate=1e-3),
    "linear-paper": TrainConfig(epochs=22, batch_size=16, learning_rate=2.4e-4),
    "transformer-paper": TrainConfig(epochs=24, batch_size=30, learning_rate=2e-3),
}
