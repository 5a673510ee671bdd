from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..autodiff import checkpoint
from ..errors import RegistryError, SchemaError
from ..schema import N_FEATURES
from ..tasks.specs import get_task
from .config import EncoderConfig
from .encoders import Embedder, build_encoder
from .heads import build_head
from .layers import Module


class ModelBundle(Module):
    """Shared embedder + encoder, and one decoder per task name.

    The output for task ``t`` depends only on the shared parameters and
    decoder ``t``. Decoder initialisation is keyed by task name, so the
    same task starts from the same weights whatever else is in the suite.
    """

    def __init__(self, cfg: EncoderConfig, tasks, seed=0):
        super().__init__()
        self.cfg = cfg.validate()
        self.seed = seed
        self.embed = self.child("embed", Embedder(N_FEATURES, cfg.embed_dim, seed))
        self.encoder = self.child("encoder", build_encoder(cfg, seed))
        self.decoders = {}
        for task in tasks:
            if isinstance(task, str):
                task = get_task(task)
            if task.name in self.decoders:
                continue
            self.decoders[task.name] = self.child(
                f"decoder.{task.name}", build_head(task, self.encoder.out_dim, seed, cfg.fts_token_dim))
        self.tasks = [d.task for d in self.decoders.values()]

    # -- parameter groups -------------------------------------------------

    def shared_parameters(self):
        return self.embed.parameters() + self.encoder.parameters()

    def decoder(self, name):
        try:
            return self.decoders[name]
        except KeyError:
            raise RegistryError(f"bundle has no decoder for task {name!r}") from None

    def decoder_parameters(self, name):
        return self.decoder(name).parameters()

    # -- forward -------------------------------------------------------------

    def encode(self, x, valid, training=False, rng=None):
        """Window ``x`` [B, T, F] and ``valid`` [B, T] -> shared representation [B, D]."""
        x = np.asarray(x, dtype=np.float64)
        valid = np.asarray(valid, dtype=bool)
        if getattr(self.encoder, "order_free", False):
            order = self.encoder.canonical_order(x, valid)
            x = np.take_along_axis(x, order[:, :, None], axis=1)
            valid = np.take_along_axis(valid, order, axis=1)
        emb = self.embed(ad.Tensor(x))
        if self.cfg.kind == "transformer":
            z = self.encoder(emb, valid, self.cfg.dropout, training, rng)
        else:
            z = self.encoder(emb, valid)
        return ad.dropout(z, self.cfg.dropout, training, rng)

    def decode(self, name, z, fts_inputs=None):
        head = self.decoder(name)
        if head.task.category == "FTS":
            return head(z, fts_inputs)
        return head(z)

    def forward(self, x, valid, names, training=False, rng=None, fts_inputs=None):
        z = self.encode(x, valid, training, rng)
        return {n: self.decode(n, z, fts_inputs) for n in names}

    # -- persistence ----------------------------------------------------------

    def state_dict(self):
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state, strict=True, skip=()):
        """Copy arrays into parameters. ``skip`` lists name prefixes left untouched."""
        own = dict(self.named_parameters())
        if strict:
            missing = [n for n in own if n not in state and not n.startswith(tuple(skip))]
            unexpected = [n for n in state if n not in own]
            if missing or unexpected:
                raise SchemaError(f"checkpoint mismatch: missing {missing[:5]}, unexpected {unexpected[:5]}")
        for name, p in own.items():
            if name.startswith(tuple(skip)) or name not in state:
                continue
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != p.shape:
                raise SchemaError(f"checkpoint {name}: shape {arr.shape} != {p.shape}")
            p.data = arr.copy()
            p.reset_state()

    def save(self, path):
        checkpoint.save(path, self.state_dict())

    def load(self, path, strict=True, skip=()):
        self.load_state_dict(checkpoint.load(path), strict=strict, skip=skip)
