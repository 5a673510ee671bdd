"""Input embedder and the three shared encoders.

Every encoder maps an embedded window ``[B, T, E]`` plus its validity mask
``[B, T]`` to one fixed-size vector per sample, ``[B, out_dim]``.
"""
from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..errors import SchemaError, UsageError
from .config import EncoderConfig
from .layers import GRULayer, LayerNorm, Linear, Module, fan_in_uniform, init_rng

_NEG = -1e30


class Embedder(Module):
    """Per-hour linear projection of (values, mask, treatments) into E dims."""

    def __init__(self, n_features, embed_dim, seed):
        super().__init__()
        self.n_features = n_features
        self.proj = self.child("proj", Linear(n_features, embed_dim, init_rng(seed, "embed")))

    def __call__(self, x):
        if x.shape[-1] != self.n_features:
            raise SchemaError(f"input has {x.shape[-1]} features per hour, the projection expects {self.n_features}")
        return self.proj(x)


def masked_pool(seq, valid, how):
    """Pool ``seq`` [B, T, D] over valid steps."""
    keep = valid.astype(np.float64)[:, :, None]
    if how == "avg":
        counts = np.maximum(keep.sum(axis=1), 1.0)
        return ad.tsum(seq * keep, axis=1) * (1.0 / counts)
    if how == "max":
        return ad.tmax(ad.masked_fill(seq, ~valid[:, :, None], _NEG), axis=1)
    if how == "last":
        return seq[:, -1, :]
    raise UsageError(f"unknown pooling {how!r}")


class GRUEncoder(Module):
    def __init__(self, cfg: EncoderConfig, seed):
        super().__init__()
        self.cfg = cfg
        dirs = 2 if cfg.bidirectional else 1
        n_in = cfg.embed_dim
        self.layers = []
        for i in range(cfg.num_layers):
            fwd = self.child(f"gru{i}.fwd", GRULayer(n_in, cfg.hidden_dim, init_rng(seed, f"gru{i}.fwd")))
            bwd = None
            if cfg.bidirectional:
                bwd = self.child(f"gru{i}.bwd", GRULayer(n_in, cfg.hidden_dim, init_rng(seed, f"gru{i}.bwd")))
            self.layers.append((fwd, bwd))
            n_in = cfg.hidden_dim * dirs
        self.fc = []
        for i, size in enumerate(cfg.fc_sizes()):
            self.fc.append(self.child(f"fc{i}", Linear(n_in, size, init_rng(seed, f"gru.fc{i}"))))
            n_in = size
        self.out_dim = n_in

    def __call__(self, emb, valid):
        seq = emb
        finals = None
        for fwd, bwd in self.layers:
            out_f, h_f = fwd(seq, valid)
            if bwd is None:
                seq, finals = out_f, h_f
            else:
                out_b, h_b = bwd(seq, valid, reverse=True)
                seq = ad.concat([out_f, out_b], axis=-1)
                finals = ad.concat([h_f, h_b], axis=-1)
        if self.cfg.pooling == "last":
            # final state of each direction (the backward pass ends at the first hour)
            pooled = finals
        else:
            pooled = masked_pool(seq, valid, self.cfg.pooling)
        for layer in self.fc:
            pooled = ad.relu(layer(pooled))
        return pooled


class LinearConcatEncoder(Module):
    """Flattens the embedded window; the projection is the only shared part."""

    def __init__(self, cfg: EncoderConfig, seed):
        super().__init__()
        self.cfg = cfg
        self.out_dim = cfg.input_window_hours * cfg.embed_dim

    def __call__(self, emb, valid):
        b, t, e = emb.shape
        if t != self.cfg.input_window_hours:
            raise UsageError(f"linear encoder needs exactly {self.cfg.input_window_hours} hours, got {t}")
        return ad.reshape(emb, (b, t * e))


class TransformerBlock(Module):
    """Post-norm block: self-attention, residual, norm, GELU feed-forward, residual, norm."""

    def __init__(self, dim, heads, inter, rng_seed, idx):
        super().__init__()
        self.dim, self.heads = dim, heads
        self.qkv = self.child("qkv", Linear(dim, 3 * dim, init_rng(rng_seed, f"tf{idx}.qkv")))
        self.out = self.child("out", Linear(dim, dim, init_rng(rng_seed, f"tf{idx}.out")))
        self.ln1 = self.child("ln1", LayerNorm(dim))
        self.ff1 = self.child("ff1", Linear(dim, inter, init_rng(rng_seed, f"tf{idx}.ff1")))
        self.ff2 = self.child("ff2", Linear(inter, dim, init_rng(rng_seed, f"tf{idx}.ff2")))
        self.ln2 = self.child("ln2", LayerNorm(dim))
        self.attention = None

    def __call__(self, x, key_valid, dropout, training, rng):
        b, s, d = x.shape
        h = self.heads
        dh = d // h
        qkv = self.qkv(x)
        qkv = ad.transpose(ad.reshape(qkv, (b, s, 3, h, dh)), (2, 0, 3, 1, 4))  # [3, B, h, S, dh]
        q, k, v = qkv[0], qkv[1], qkv[2]
        scores = (q @ ad.transpose(k, (0, 1, 3, 2))) * (1.0 / np.sqrt(dh))
        scores = ad.masked_fill(scores, ~key_valid[:, None, None, :], _NEG)
        attn = ad.softmax(scores, axis=-1)
        self.attention = attn.data
        ctx = ad.reshape(ad.transpose(attn @ v, (0, 2, 1, 3)), (b, s, d))
        x = self.ln1(x + ad.dropout(self.out(ctx), dropout, training, rng))
        ff = self.ff2(ad.gelu(self.ff1(x)))
        return self.ln2(x + ad.dropout(ff, dropout, training, rng))


class TransformerEncoder(Module):
    """Self-attention over hours with no positional information.

    The encoder is a function of the *set* of hours. To make that hold
    bit-for-bit (summation order would otherwise leak the input order into
    the last floating-point digit), :meth:`canonical_order` sorts the hours
    before embedding; the bundle applies it.
    """

    order_free = True

    def __init__(self, cfg: EncoderConfig, seed):
        super().__init__()
        self.cfg = cfg
        d = cfg.embed_dim
        if cfg.use_cls:
            self.cls = self.param("cls", fan_in_uniform(init_rng(seed, "tf.cls"), d, (d,)))
        self.blocks = [self.child(f"block{i}", TransformerBlock(d, cfg.num_heads, cfg.intermediate_dim, seed, i))
                       for i in range(cfg.num_layers)]
        self.out_dim = d

    @staticmethod
    def canonical_order(x, valid):
        """Per-sample permutation sorting hours lexicographically (validity first)."""
        b, t, f = x.shape
        order = np.empty((b, t), dtype=np.int64)
        for i in range(b):
            keys = [x[i, :, j] for j in range(f - 1, -1, -1)] + [valid[i]]
            order[i] = np.lexsort(keys)
        return order

    def __call__(self, emb, valid, dropout=0.0, training=False, rng=None):
        b = emb.shape[0]
        if self.cfg.use_cls:
            cls = ad.reshape(self.cls, (1, 1, -1)) * np.ones((b, 1, 1))
            x = ad.concat([cls, emb], axis=1)
            key_valid = np.concatenate([np.ones((b, 1), dtype=bool), valid], axis=1)
        else:
            x, key_valid = emb, valid
        for block in self.blocks:
            x = block(x, key_valid, dropout, training, rng)
        if self.cfg.use_cls:
            return x[:, 0, :]
        return masked_pool(x, valid, self.cfg.pooling)

    @property
    def attention(self):
        return [blk.attention for blk in self.blocks]


def build_encoder(cfg: EncoderConfig, seed):
    cfg.validate()
    if cfg.kind == "gru":
        return GRUEncoder(cfg, seed)
    if cfg.kind == "linear-concat":
        return LinearConcatEncoder(cfg, seed)
    return TransformerEncoder(cfg, seed)
