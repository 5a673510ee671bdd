"""Loss assembly, one training epoch, and evaluation."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .. import autodiff as ad
from ..errors import NumericError, UsageError
from ..metrics.scores import auroc_macro, r_squared, regression_analog
from ..tasks.specs import BINARY, MULTICLASS, MULTILABEL, REGRESSION, SEQ_MULTICLASS
from .batching import batches, training_samples
from .optim import adam_step, clip_gradients, zero_grad

log = logging.getLogger(__name__)


def task_losses(bundle, batch, names, training=False, rng=None):
    """Per-task masked losses at the current parameters."""
    fts_inputs = None
    for n in names:
        if bundle.decoder(n).task.label_type == SEQ_MULTICLASS:
            fts_inputs = batch.targets[n][0]
    outputs = bundle.forward(batch.x, batch.valid, names, training, rng, fts_inputs)
    losses = {}
    for n in names:
        task = bundle.decoder(n).task
        if task.label_type == SEQ_MULTICLASS:
            _, y, m = batch.targets[n]
        else:
            y, m = batch.targets[n]
        losses[n] = ad.loss(task.loss_kind, outputs[n], y, m)
    return losses


def total_loss(losses, regression_weight=1.0):
    """Sum of per-task losses; the regression term is scaled."""
    if not losses:
        raise UsageError("total loss needs at least one active task")
    total = None
    for name, value in losses.items():
        if name == "NEXT-REG":
            value = value * regression_weight
        total = value if total is None else total + value
    return total


def train_epoch(bundle, records, names, trainable, cfg, epoch, rng, finetune=False):
    """One pass over freshly sampled windows. Returns the mean batch loss."""
    tasks = [bundle.decoder(n).task for n in names]
    samples = training_samples(records, tasks, bundle.cfg.input_window_hours, rng)
    lr = cfg.lr_at(epoch, finetune)
    seen = 0.0
    count = 0
    for batch in batches(samples, tasks, bundle.cfg.input_window_hours, cfg.batch_size, cfg.fts_max_len):
        zero_grad(trainable)
        loss = total_loss(task_losses(bundle, batch, names, True, rng), cfg.regression_weight)
        if not np.isfinite(loss.data):
            raise NumericError(f"epoch {epoch}: loss became {loss.data} (tasks {names})")
        ad.backward(loss)
        clip_gradients(trainable, cfg.clip_norm)
        adam_step(trainable, lr, cfg.weight_decay)
        seen += float(loss.data)
        count += 1
    return seen / max(count, 1)


@dataclass
class TaskPredictions:
    """Valid evaluation rows for one task."""

    scores: list = field(default_factory=list)
    labels: list = field(default_factory=list)
    masks: list = field(default_factory=list)
    sex: list = field(default_factory=list)

    def arrays(self):
        return (np.concatenate(self.scores), np.concatenate(self.labels),
                np.concatenate(self.masks), np.concatenate(self.sex))


def _softmax(z):
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def predict(bundle, eval_batches, names):
    """Collect scores and labels over fixed evaluation batches (no tape)."""
    out = {n: TaskPredictions() for n in names}
    with ad.no_grad():
        for batch in eval_batches:
            fts_inputs = None
            for n in names:
                if bundle.decoder(n).task.label_type == SEQ_MULTICLASS:
                    fts_inputs = batch.targets[n][0]
            outputs = bundle.forward(batch.x, batch.valid, names, False, None, fts_inputs)
            for n in names:
                task = bundle.decoder(n).task
                z = outputs[n].data
                p = out[n]
                if task.label_type == SEQ_MULTICLASS:
                    _, y, m = batch.targets[n]
                    keep = m > 0
                    p.scores.append(_softmax(z)[keep])
                    p.labels.append(y[keep])
                    p.masks.append(np.ones(int(keep.sum())))
                    p.sex.append(np.broadcast_to(batch.sex[:, None], keep.shape)[keep])
                    continue
                y, m = batch.targets[n]
                rows = m > 0 if m.ndim == 1 else m.any(axis=1)
                if task.label_type == MULTICLASS:
                    p.scores.append(_softmax(z)[rows])
                else:
                    p.scores.append(z[rows])
                p.labels.append(y[rows])
                p.masks.append(m[rows])
                p.sex.append(batch.sex[rows])
    return out


def task_score(task, scores, labels, masks):
    """Macro AUROC (or the regression analog) for one task's predictions."""
    if len(scores) == 0:
        return float("nan"), []
    if task.label_type == REGRESSION:
        return regression_analog(r_squared(scores, labels, masks)), []
    if task.label_type == BINARY:
        res = auroc_macro(scores[:, :1], labels[:, :1])
    elif task.label_type == MULTILABEL:
        res = auroc_macro(scores, labels)
    else:
        res = auroc_macro(scores, labels.astype(np.int64))
    return res.value, res.per_label


def evaluate(bundle, eval_batches, names, subgroups=False):
    """Per-task scores; with ``subgroups`` also per sex.

    Returns ``{name: {"all": (value, per_label, n), "M": ..., "F": ...}}``.
    """
    preds = predict(bundle, eval_batches, names)
    out = {}
    for n in names:
        task = bundle.decoder(n).task
        p = preds[n]
        if not p.scores:
            out[n] = {"all": (float("nan"), [], 0)}
            continue
        s, y, m, sex = p.arrays()
        res = {"all": (*task_score(task, s, y, m), len(s))}
        if subgroups:
            for g in ("M", "F"):
                sel = sex == g
                res[g] = (*task_score(task, s[sel], y[sel], m[sel]), int(sel.sum()))
        out[n] = res
    return out
