from __future__ import annotations

from dataclasses import asdict, dataclass, fields

from ..errors import ConfigError

KINDS = ("linear-concat", "gru", "transformer")
POOLINGS = ("last", "max", "avg", "cls")


@dataclass(frozen=True)
class EncoderConfig:
    """Architecture of the shared embedder + encoder.

    For the transformer the model width is ``embed_dim`` and must be a
    multiple of ``num_heads``; ``hidden_dim`` is ignored. For the linear
    encoder only ``embed_dim`` and the window length matter.
    """

    kind: str = "gru"
    embed_dim: int = 233
    hidden_dim: int = 126
    num_layers: int = 2
    bidirectional: bool = False
    pooling: str = "last"
    dropout: float = 0.42
    input_window_hours: int = 48
    num_heads: int = 12
    intermediate_dim: int = 55
    use_cls: bool = True
    fc_layers: int = 0
    fc_base: int = 128
    fc_growth: float = 1.0
    fts_token_dim: int = 16

    def validate(self):
        if self.kind not in KINDS:
            raise ConfigError(f"encoder kind must be one of {KINDS}, got {self.kind!r}")
        if self.pooling not in POOLINGS:
            raise ConfigError(f"pooling must be one of {POOLINGS}, got {self.pooling!r}")
        if self.pooling == "cls" and self.kind != "transformer":
            raise ConfigError("cls pooling needs the transformer encoder")
        if self.kind == "transformer" and self.use_cls != (self.pooling == "cls"):
            raise ConfigError("use_cls and pooling='cls' must agree")
        if self.kind == "transformer" and self.pooling == "last":
            raise ConfigError("an order-free transformer has no last hour; use cls, avg or max pooling")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must lie in [0, 1), got {self.dropout}")
        if not 12 <= self.input_window_hours <= 168:
            raise ConfigError(f"input window {self.input_window_hours}h outside [12, 168]")
        if min(self.embed_dim, self.hidden_dim, self.num_layers, self.num_heads,
               self.intermediate_dim, self.fts_token_dim) < 1:
            raise ConfigError("sizes and layer counts must be positive")
        if self.kind == "transformer" and self.embed_dim % self.num_heads:
            raise ConfigError(f"transformer width {self.embed_dim} is not divisible by {self.num_heads} heads")
        if self.fc_layers < 0 or self.fc_base < 1 or self.fc_growth <= 0:
            raise ConfigError("fully connected stack needs fc_layers >= 0, fc_base >= 1, fc_growth > 0")
        return self

    def fc_sizes(self):
        return [max(1, int(round(self.fc_base * self.fc_growth ** i))) for i in range(self.fc_layers)]

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown encoder settings {sorted(extra)}")
        return cls(**d).validate()


PRESETS = {
    "gru-paper": EncoderConfig(kind="gru", embed_dim=233, hidden_dim=126, num_layers=2,
                               bidirectional=False, pooling="last", dropout=0.42),
    "linear-paper": EncoderConfig(kind="linear-concat", embed_dim=140, pooling="last", dropout=0.22,
                                  num_layers=1),
    "transformer-paper": EncoderConfig(kind="transformer", embed_dim=72, num_heads=12, num_layers=1,
                                       intermediate_dim=55, use_cls=True, pooling="cls", dropout=0.18),
}


def preset(name):
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown encoder preset {name!r}; choose from {sorted(PRESETS)}") from None
