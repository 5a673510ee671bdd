"""Task decoders: one affine head per task, and a teacher-forced LSTM for FTS."""
from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..errors import DataError, UsageError
from ..schema import EOS, N_FTS_INPUTS, N_FTS_OUTPUTS, START
from ..tasks.specs import SEQ_MULTICLASS
from .layers import LSTMCell, Linear, Module, fan_in_uniform, init_rng


class DenseHead(Module):
    """Single affine layer. Logits for binary/multilabel/multiclass tasks,
    raw values for regression; the loss applies the link function."""

    def __init__(self, task, in_dim, seed):
        super().__init__()
        if task.label_type == SEQ_MULTICLASS:
            raise UsageError(f"{task.name} needs the sequence decoder")
        self.task = task
        self.linear = self.child("linear", Linear(in_dim, task.width, init_rng(seed, f"head.{task.name}")))

    def __call__(self, z):
        return self.linear(z)


def pad_sequences(seqs, max_len=None):
    """Teacher-forcing inputs, targets and step mask for token sequences.

    Inputs are ``START`` followed by the targets shifted right by one.
    """
    seqs = [list(s) if max_len is None else list(s)[:max_len] for s in seqs]
    for s in seqs:
        for tok in s:
            if not 0 <= tok < N_FTS_OUTPUTS:
                raise DataError(f"treatment-sequence token {tok} outside the vocabulary")
    length = max((len(s) for s in seqs), default=1)
    length = max(length, 1)
    targets = np.full((len(seqs), length), EOS, dtype=np.int64)
    inputs = np.full((len(seqs), length), START, dtype=np.int64)
    mask = np.zeros((len(seqs), length))
    for i, s in enumerate(seqs):
        targets[i, : len(s)] = s
        inputs[i, 1: len(s)] = s[:-1]
        mask[i, : len(s)] = 1.0
    return inputs, targets, mask


class SequenceDecoder(Module):
    """LSTM over treatment-set tokens whose initial hidden state is the encoding.

    Step k sees the true token k-1 (a start token at k=0), at training and
    at evaluation alike.
    """

    def __init__(self, task, in_dim, seed, token_dim=16, hidden=None):
        super().__init__()
        self.task = task
        self.hidden = in_dim if hidden is None else hidden
        rng = init_rng(seed, f"head.{task.name}")
        self.tokens = self.param("tokens", fan_in_uniform(rng, token_dim, (N_FTS_INPUTS, token_dim)))
        self.bridge = None
        if self.hidden != in_dim:
            self.bridge = self.child("bridge", Linear(in_dim, self.hidden, rng))
        self.cell = self.child("cell", LSTMCell(token_dim, self.hidden, rng))
        self.out = self.child("out", Linear(self.hidden, N_FTS_OUTPUTS, rng))

    def __call__(self, z, inputs):
        """``z`` [B, D], ``inputs`` int [B, L] -> logits [B, L, N_FTS_OUTPUTS]."""
        b, length = inputs.shape
        h = z if self.bridge is None else self.bridge(z)
        c = ad.Tensor(np.zeros((b, self.hidden)))
        emb = ad.getitem(self.tokens, inputs)  # [B, L, token_dim]
        proj = ad.reshape(ad.reshape(emb, (b * length, -1)) @ self.cell.W + self.cell.b, (b, length, -1))
        outs = []
        for k in range(length):
            h, c = self.cell(proj[:, k, :], h, c)
            outs.append(h)
        hs = ad.stack(outs, axis=1)
        return self.out(hs)


def build_head(task, in_dim, seed, token_dim=16):
    if task.label_type == SEQ_MULTICLASS:
        return SequenceDecoder(task, in_dim, seed, token_dim=token_dim)
    return DenseHead(task, in_dim, seed)
