"""Label derivation from a :class:`PatientRecord` at an anchor hour.

An anchor ``t`` means the model has seen hours ``[.., t)``. Rolling events
count as positive when they occur in ``(t+gap, t+gap+horizon]`` and are
masked (``None``) inside the gap ``(t, t+gap]``. All functions are pure in
``(record, anchor, seed)``.
"""
from __future__ import annotations

import logging

import numpy as np

from ..errors import DataError, SchemaError, UsageError
from ..schema import ACUITY_NAMES, DISCHARGE_NAMES, EOS, N_TREATMENTS, NO_DISCHARGE
from .specs import (
    AUTOREGRESSIVE,
    BINARY,
    EVAL_POINTS,
    LOS_THRESHOLD_HOURS,
    MIN_HISTORY,
    MULTICLASS,
    MULTILABEL,
    READMIT_DAYS,
    REGRESSION,
    ROLLING,
    SEQ_MULTICLASS,
    STATIC,
    STATIC_ANCHOR,
    TERMINAL,
)

log = logging.getLogger(__name__)

_DIS_INDEX = {name: i for i, name in enumerate(DISCHARGE_NAMES)}
_ACU_INDEX = {name: i for i, name in enumerate(ACUITY_NAMES)}
_TREATMENT_BITS = 1 << np.arange(N_TREATMENTS)


def _check_anchor(record, t):
    if t < 0 or t > record.stay_hours:
        raise UsageError(f"anchor {t} is past discharge at {record.stay_hours}h")


def label_rolling_event(record, event, t, gap, horizon):
    """1 / 0 for a death, CMO or DNR event in the prediction window, None if masked.

    CMO and DNR anchors at or after an existing order are masked: only a
    *new* order is a prediction target.
    """
    _check_anchor(record, t)
    if event == "death":
        e = record.death_hour
    elif event == "cmo-order":
        e = record.cmo_hour
    elif event == "dnr-order":
        e = record.dnr_hour
    else:
        raise UsageError(f"unknown rolling event {event!r}")
    if e is None:
        return None if t == record.stay_hours else 0
    if e <= t:
        return None
    if e <= t + gap:
        return None
    return 1 if e <= t + gap + horizon else 0


def label_discharge(record, t, gap, horizon):
    """Class index into the discharge label space, or None if masked."""
    _check_anchor(record, t)
    loc = record.discharge_location
    if loc is None:
        return None if t == record.stay_hours else _DIS_INDEX[NO_DISCHARGE]
    if loc not in _DIS_INDEX or loc == NO_DISCHARGE:
        raise SchemaError(f"unknown discharge destination {loc!r}")
    d = record.discharge_hour
    if d <= t + gap:
        return None
    return _DIS_INDEX[loc] if d <= t + gap + horizon else _DIS_INDEX[NO_DISCHARGE]


def label_static(record, gap=12):
    """ICD bits, long-stay flag and final acuity class; None when the stay is too short."""
    if record.stay_hours <= STATIC_ANCHOR + gap:
        return None
    if record.icd is None:
        raise DataError(f"patient {record.patient_id}: missing ICD outcome")
    return {
        "icd": np.asarray(record.icd, dtype=np.float64),
        "los": int(record.stay_hours >= LOS_THRESHOLD_HOURS),
        "acu": _ACU_INDEX[record.acuity],
    }


def label_readmission(record):
    return int(record.readmit_days is not None and record.readmit_days <= READMIT_DAYS)


def label_wbm(record, t):
    """Next-hour measured bits, regression targets and regression mask."""
    if t < 0 or t >= record.stay_hours:
        raise UsageError(f"no hour after anchor {t} in a {record.stay_hours}h stay")
    measured = record.measured[t].astype(np.float64)
    values = np.where(record.measured[t], record.values[t], 0.0).astype(np.float64)
    return measured, values, measured.copy()


def treatment_tokens(treatments):
    """Per-hour treatment bitmask tokens."""
    return (np.asarray(treatments, dtype=np.int64) * _TREATMENT_BITS).sum(axis=1)


def label_fts(record, t, max_len=None):
    """Treatment-set tokens from hour ``t`` to discharge, run-collapsed, then EOS."""
    _check_anchor(record, t)
    tokens = treatment_tokens(record.treatments[t:])
    if len(tokens):
        keep = np.concatenate([[True], tokens[1:] != tokens[:-1]])
        tokens = tokens[keep]
    seq = [int(x) for x in tokens] + [EOS]
    if max_len is not None and len(seq) > max_len:
        seq = seq[:max_len]
    return seq


def sample_eval_points(record, task, seed):
    """Anchor hours at which ``task`` is evaluated for this patient.

    Rolling and autoregressive tasks share one pool, ``[MIN_HISTORY, stay)``,
    from which up to ``EVAL_POINTS`` anchors are drawn; per-task gap masking
    then happens in the label functions.
    """
    d = record.stay_hours
    if task.temporal in (ROLLING, AUTOREGRESSIVE):
        pool = np.arange(MIN_HISTORY, d)
        if len(pool) == 0:
            log.debug("patient %s: no rolling anchor in a %dh stay", record.patient_id, d)
            return []
        if len(pool) <= EVAL_POINTS:
            return [int(x) for x in pool]
        rng = np.random.default_rng([seed, record.patient_id])
        return sorted(int(x) for x in rng.choice(pool, EVAL_POINTS, replace=False))
    if task.temporal == STATIC:
        if d <= STATIC_ANCHOR + (task.gap_hours or 0):
            log.debug("patient %s: stay too short for static tasks", record.patient_id)
            return []
        return [STATIC_ANCHOR]
    if task.temporal == TERMINAL:
        return [d]
    raise UsageError(f"unknown temporal mode {task.temporal!r}")


def label_for(task, record, t, fts_max_len=None):
    """Decoder-ready ``(target, mask)`` for one task at one anchor.

    Shapes: binary ``[1]``; multilabel and regression ``[width]``;
    multiclass scalars; FTS a token list with mask None.
    """
    if task.category in ("MOR", "CMO", "DNR"):
        y = label_rolling_event(record, task.label_space[0], t, task.gap_hours, task.horizon_hours)
        return np.array([0.0 if y is None else float(y)]), np.array([0.0 if y is None else 1.0])
    if task.category == "DIS":
        y = label_discharge(record, t, task.gap_hours, task.horizon_hours)
        return (0 if y is None else y), (0.0 if y is None else 1.0)
    if task.category in ("ICD", "LOS", "ACU"):
        lab = label_static(record, task.gap_hours)
        if task.category == "ICD":
            if lab is None:
                return np.zeros(task.width), np.zeros(task.width)
            return lab["icd"], np.ones(task.width)
        if task.category == "LOS":
            if lab is None:
                return np.zeros(1), np.zeros(1)
            return np.array([float(lab["los"])]), np.ones(1)
        return (0, 0.0) if lab is None else (lab["acu"], 1.0)
    if task.category == "REA":
        return np.array([float(label_readmission(record))]), np.ones(1)
    if task.category in ("WBM", "NEXT-REG"):
        if t >= record.stay_hours:
            return np.zeros(task.width), np.zeros(task.width)
        bits, values, reg_mask = label_wbm(record, t)
        if task.category == "WBM":
            return bits, np.ones(task.width)
        return values, reg_mask
    if task.category == "FTS":
        return label_fts(record, t, fts_max_len), None
    raise UsageError(f"no label rule for task {task.name!r}")


__all__ = [
    "BINARY", "MULTICLASS", "MULTILABEL", "REGRESSION", "SEQ_MULTICLASS",
    "label_discharge", "label_for", "label_fts", "label_readmission",
    "label_rolling_event", "label_static", "label_wbm", "sample_eval_points",
    "treatment_tokens",
]
