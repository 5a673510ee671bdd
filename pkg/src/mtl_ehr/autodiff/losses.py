"""Masked losses. Each returns the mean over mask-valid entries as a scalar
tensor; an all-zero mask yields a zero loss whose gradient is zero."""
from __future__ import annotations

import numpy as np

from ..errors import DimensionError, NumericError, UsageError
from .tensor import _make, _sigmoid, as_tensor


def _prepare(pred, target, mask, target_shape=None):
    pred = as_tensor(pred)
    target = np.asarray(target)
    mask = np.asarray(mask, dtype=np.float64)
    want = pred.shape if target_shape is None else target_shape
    if target.shape != want or mask.shape != want:
        raise DimensionError(
            f"loss: prediction {pred.shape}, target {target.shape} and mask {mask.shape} disagree"
        )
    if np.isnan(pred.data).any() or (target.dtype.kind == "f" and np.isnan(target[mask > 0]).any()):
        raise NumericError("loss: NaN in inputs")
    return pred, target, mask


def _zero(pred):
    shape = pred.shape
    return _make(np.float64(0.0), (pred,), lambda g: (np.zeros(shape),))


def bce_with_logits(logits, target, mask):
    z, y, m = _prepare(logits, target, mask)
    n = m.sum()
    if n == 0:
        return _zero(z)
    y = y.astype(np.float64)
    x = z.data
    per = np.maximum(x, 0.0) - x * y + np.log1p(np.exp(-np.abs(x)))
    val = per[m > 0].sum() / n
    return _make(val, (z,), lambda g: (g * m * (_sigmoid(x) - y) / n,))


def cross_entropy(logits, target, mask):
    """Categorical cross-entropy; ``target`` holds class indices over the last axis."""
    z = as_tensor(logits)
    z, y, m = _prepare(z, target, mask, target_shape=z.shape[:-1])
    n = m.sum()
    if n == 0:
        return _zero(z)
    x = z.data
    c = x.shape[-1]
    y = y.astype(np.int64)
    if ((y < 0) | (y >= c))[m > 0].any():
        raise UsageError(f"cross_entropy: class index outside [0, {c})")
    y = np.where(m > 0, y, 0)
    shifted = x - x.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    logp = shifted - lse
    picked = np.take_along_axis(logp, y[..., None], axis=-1)[..., 0]
    val = -picked[m > 0].sum() / n

    def rule(g):
        grad = np.exp(logp)
        np.put_along_axis(grad, y[..., None], np.take_along_axis(grad, y[..., None], axis=-1) - 1.0, axis=-1)
        return (g * grad * (m / n)[..., None],)

    return _make(val, (z,), rule)


def mse(pred, target, mask):
    p, y, m = _prepare(pred, target, mask)
    n = m.sum()
    if n == 0:
        return _zero(p)
    diff = (p.data - np.where(m > 0, y, 0.0)) * m
    val = (diff * diff)[m > 0].sum() / n
    return _make(val, (p,), lambda g: (g * 2.0 * diff / n,))


_KINDS = {
    "bce": bce_with_logits,
    "binary-cross-entropy-with-logits": bce_with_logits,
    "ce": cross_entropy,
    "categorical-cross-entropy": cross_entropy,
    "mse": mse,
    "mean-squared-error": mse,
}


def loss(kind, pred, target, mask):
    try:
        fn = _KINDS[kind]
    except KeyError:
        raise UsageError(f"unknown loss kind {kind!r}") from None
    return fn(pred, target, mask)
