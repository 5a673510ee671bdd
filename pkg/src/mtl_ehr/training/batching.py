"""Turning patients into model-ready windows and per-task targets.

A sample is ``(record, anchor, mode)``. Rolling/autoregressive samples feed
the rolling, will-be-measured, regression and treatment-sequence tasks;
the static sample (anchor 24) feeds ICD/LOS/ACU; the terminal sample
(anchor at the end of the stay) feeds readmission. In a mixed batch each
task's mask is zero on samples of the other modes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data.dataset import sample_training_window
from ..models.heads import pad_sequences
from ..schema import N_FEATURES
from ..tasks.labels import label_for, sample_eval_points
from ..tasks.specs import MULTICLASS, ROLLING, SEQ_MULTICLASS, STATIC, STATIC_ANCHOR, TERMINAL, get_task


@dataclass
class Batch:
    x: np.ndarray  # [B, T, F]
    valid: np.ndarray  # [B, T]
    targets: dict  # task name -> (target, mask); FTS -> (inputs, targets, mask)
    sex: np.ndarray  # [B] of "F"/"M"
    patient_ids: np.ndarray
    anchors: np.ndarray

    def __len__(self):
        return len(self.sex)


def modes_of(tasks):
    return {t.mode for t in tasks}


def static_ok(record, tasks):
    gap = max((t.gap_hours or 0) for t in tasks if t.mode == STATIC)
    return record.stay_hours > STATIC_ANCHOR + gap


def training_samples(records, tasks, window, rng):
    """One epoch: a random window per patient, plus static and terminal windows."""
    modes = modes_of(tasks)
    out = []
    for rec in records:
        if ROLLING in modes:
            _, end = sample_training_window(rec, window, rng)
            out.append((rec, end, ROLLING))
        if STATIC in modes and static_ok(rec, tasks):
            out.append((rec, STATIC_ANCHOR, STATIC))
        if TERMINAL in modes:
            out.append((rec, rec.stay_hours, TERMINAL))
    order = rng.permutation(len(out))
    return [out[i] for i in order]


def evaluation_samples(records, tasks, eval_seed):
    """Fixed evaluation anchors; rolling tasks share one anchor pool per patient."""
    modes = modes_of(tasks)
    roll = get_task("MOR-24")
    out = []
    for rec in records:
        if ROLLING in modes:
            out.extend((rec, t, ROLLING) for t in sample_eval_points(rec, roll, eval_seed))
        if STATIC in modes and static_ok(rec, tasks):
            out.append((rec, STATIC_ANCHOR, STATIC))
        if TERMINAL in modes:
            out.append((rec, rec.stay_hours, TERMINAL))
    return out


def make_batch(samples, tasks, window, fts_max_len):
    n = len(samples)
    x = np.zeros((n, window, N_FEATURES), dtype=np.float64)
    valid = np.zeros((n, window), dtype=bool)
    for i, (rec, anchor, _) in enumerate(samples):
        x[i], valid[i] = rec.window(anchor, window)
    targets = {}
    for task in tasks:
        mine = [s[2] == task.mode for s in samples]
        if task.label_type == SEQ_MULTICLASS:
            seqs = [label_for(task, rec, t, fts_max_len)[0] if ok else []
                    for (rec, t, _), ok in zip(samples, mine)]
            targets[task.name] = pad_sequences(seqs, fts_max_len)
            continue
        if task.label_type == MULTICLASS:
            y = np.zeros(n, dtype=np.int64)
            m = np.zeros(n)
        else:
            y = np.zeros((n, task.width))
            m = np.zeros((n, task.width))
        for i, ((rec, t, _), ok) in enumerate(zip(samples, mine)):
            if ok:
                y[i], m[i] = label_for(task, rec, t)
        targets[task.name] = (y, m)
    return Batch(
        x=x, valid=valid, targets=targets,
        sex=np.array([s[0].sex for s in samples]),
        patient_ids=np.array([s[0].patient_id for s in samples]),
        anchors=np.array([s[1] for s in samples]),
    )


def batches(samples, tasks, window, batch_size, fts_max_len):
    for lo in range(0, len(samples), batch_size):
        yield make_batch(samples[lo:lo + batch_size], tasks, window, fts_max_len)
