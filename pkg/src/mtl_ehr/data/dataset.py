"""Cohort container, patient-level splits, persistence and subsampling.

Binary layout ``MTLD1`` (little-endian)::

    b"MTLD1"
    u16  schema version
    u32  patients, u32 channels, u32 treatments, u32 ICD categories
    per patient:
        u32  block length in bytes (excluding this field)
        i64  patient id
        u8   sex (0 = F, 1 = M)
        u8   split (0 train, 1 tune, 2 test, 255 unassigned)
        u32  stay hours H
        i32  death hour, CMO hour, DNR hour (-1 = none)
        u8   in-hospital death
        u8   discharge destination index into the discharge label space (255 = none)
        f64  readmission delay in days (NaN = none)
        u8   has latent path
        u8   ICD bits, packed (ceil(C/8) bytes)
        f32  values[H, channels]
        u8   measured bits, packed row-major (ceil(H*channels/8) bytes)
        u8   treatment bits, packed row-major (ceil(H*treatments/8) bytes)
        f32  latent[H]                       (only when flagged)
    u32  CRC32 of every preceding byte
"""
from __future__ import annotations

import csv
import logging
import math
import os
import struct
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..autodiff.checkpoint import atomic_write
from ..errors import ChecksumError, ConfigError, DataError, SchemaError
from ..schema import (
    CHANNEL_NAMES,
    DISCHARGE_NAMES,
    ICD_NAMES,
    N_CHANNELS,
    N_TREATMENTS,
    SCHEMA_VERSION,
    TREATMENTS,
)
from .generator import CalibrationTargets, _plan, generate_patient
from .records import PatientRecord

log = logging.getLogger(__name__)

MAGIC = b"MTLD1"
SPLITS = ("train", "tune", "test")
UNASSIGNED = 255
_HEADER = struct.Struct("<HIIII")
_FIXED = struct.Struct("<qBBIiiiBBdB")

FEW_SHOT_GRID = (0.001, 0.002, 0.003, 0.006, 0.01, 0.018, 0.032, 0.056,
                 0.1, 0.178, 0.316, 0.562, 1.0)


@dataclass
class CohortDataset:
    records: list
    splits: np.ndarray = None  # per-record code into SPLITS, or UNASSIGNED
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.splits is None:
            self.splits = np.full(len(self.records), UNASSIGNED, dtype=np.uint8)
        self.splits = np.asarray(self.splits, dtype=np.uint8)
        if len(self.splits) != len(self.records):
            raise DataError("split assignment length differs from the record count")
        ids = [r.patient_id for r in self.records]
        if len(set(ids)) != len(ids):
            raise DataError("duplicate patient ids in cohort")

    def __len__(self):
        return len(self.records)

    def split(self, name):
        """Records assigned to ``name`` (one of train/tune/test)."""
        if name not in SPLITS:
            raise ConfigError(f"unknown split {name!r}")
        code = SPLITS.index(name)
        return [r for r, s in zip(self.records, self.splits) if s == code]

    def split_sizes(self):
        return {name: int(np.sum(self.splits == i)) for i, name in enumerate(SPLITS)}


def _generate_chunk(args):
    seed, lo, hi, targets = args
    plan = _plan(targets)
    return [generate_patient(plan, seed, i) for i in range(lo, hi)]


def generate_cohort(seed, n_patients, targets: Optional[CalibrationTargets] = None,
                    jobs=1, split_seed=None) -> CohortDataset:
    """Generate a cohort and assign an 80/10/10 split.

    Patients are independent streams, so ``jobs > 1`` yields the same cohort.
    """
    if n_patients < 100:
        raise ConfigError(f"a cohort needs at least 100 patients, got {n_patients}")
    targets = (targets or CalibrationTargets()).validate()
    if jobs <= 1:
        records = _generate_chunk((seed, 0, n_patients, targets))
    else:
        bounds = np.linspace(0, n_patients, jobs * 4 + 1).astype(int)
        chunks = [(seed, lo, hi, targets) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = [r for part in pool.map(_generate_chunk, chunks) for r in part]
    ds = CohortDataset(records)
    ds.splits = split_patients(ds, seed=seed if split_seed is None else split_seed)
    return ds


def split_sizes(n, ratios=(80, 10, 10)):
    """Train gets ``floor(n * r_train)``; the remainder divides between tune and test."""
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 100) > 1e-9:
        raise ConfigError(f"split ratios must be three non-negative numbers summing to 100, got {ratios}")
    train = math.floor(n * ratios[0] / 100 + 1e-9)
    rest = n - train
    tune = rest if ratios[2] == 0 else round(rest * ratios[1] / (ratios[1] + ratios[2]))
    test = rest - tune
    if min(train, tune, test) < 1:
        raise DataError(f"{n} patients cannot fill three non-empty splits with ratios {ratios}")
    return train, tune, test


def split_patients(dataset, ratios=(80, 10, 10), seed=0):
    """Per-record split codes; a seeded permutation of patients, never of hours."""
    n = len(dataset)
    train, tune, _ = split_sizes(n, ratios)
    order = np.random.default_rng([seed, 0x5717]).permutation(n)
    codes = np.empty(n, dtype=np.uint8)
    codes[order[:train]] = 0
    codes[order[train:train + tune]] = 1
    codes[order[train + tune:]] = 2
    return codes


def sample_training_window(record, hours, rng):
    """Uniform ``(start, end)`` hour range of length ``hours`` inside the stay.

    Stays shorter than the window start before hour 0; the negative part is
    zero padding with mask 0 (see :meth:`PatientRecord.window`).
    """
    if not 12 <= hours <= 168:
        raise ConfigError(f"window of {hours}h outside [12, 168]")
    d = record.stay_hours
    if d <= hours:
        start = d - hours
    else:
        start = int(rng.integers(0, d - hours + 1))
    return start, start + hours


@dataclass(frozen=True)
class SubsampleSpec:
    """Training-split reduction: ``few-shot`` keeps a fraction of patients,
    ``imbalanced`` removes a fraction of female patients."""

    mode: str = "none"
    fraction: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("none", "few-shot", "imbalanced"):
            raise ConfigError(f"unknown subsample mode {self.mode!r}")
        if self.mode == "few-shot" and not 0.0 < self.fraction <= 1.0:
            raise ConfigError(f"few-shot fraction must lie in (0, 1], got {self.fraction}")
        if self.mode == "imbalanced" and not 0.0 <= self.fraction <= 1.0:
            raise ConfigError(f"female removal fraction must lie in [0, 1], got {self.fraction}")


def subsample(train_records, spec: SubsampleSpec):
    """Reduced training list, in original order. Only ever applied to train."""
    n = len(train_records)
    rng = np.random.default_rng([spec.seed, 0x5B5])
    if spec.mode == "none":
        keep = list(train_records)
    elif spec.mode == "few-shot":
        k = int(round(spec.fraction * n))
        idx = np.sort(rng.choice(n, size=k, replace=False)) if k else np.array([], dtype=int)
        keep = [train_records[i] for i in idx]
    else:
        female = np.array([i for i, r in enumerate(train_records) if r.sex == "F"], dtype=int)
        k = int(round(spec.fraction * len(female)))
        drop = set(rng.choice(female, size=k, replace=False).tolist()) if k else set()
        keep = [r for i, r in enumerate(train_records) if i not in drop]
    if not keep:
        raise DataError(f"subsampling {spec} left an empty training set")
    return keep


# ---------------------------------------------------------------- binary IO

_DEST_INDEX = {name: i for i, name in enumerate(DISCHARGE_NAMES)}


def _opt(v):
    return -1 if v is None else int(v)


def _encode_record(rec: PatientRecord, split: int) -> bytes:
    h = rec.stay_hours
    latent = rec.latent
    fixed = _FIXED.pack(
        rec.patient_id, 0 if rec.sex == "F" else 1, split, h,
        _opt(rec.death_hour), _opt(rec.cmo_hour), _opt(rec.dnr_hour),
        int(rec.in_hospital_death),
        UNASSIGNED if rec.discharge_location is None else _DEST_INDEX[rec.discharge_location],
        math.nan if rec.readmit_days is None else float(rec.readmit_days),
        int(latent is not None),
    )
    parts = [
        fixed,
        np.packbits(np.asarray(rec.icd, dtype=bool)).tobytes(),
        np.ascontiguousarray(rec.values, dtype="<f4").tobytes(),
        np.packbits(np.asarray(rec.measured, dtype=bool).ravel()).tobytes(),
        np.packbits(np.asarray(rec.treatments, dtype=bool).ravel()).tobytes(),
    ]
    if latent is not None:
        parts.append(np.ascontiguousarray(latent, dtype="<f4").tobytes())
    body = b"".join(parts)
    return struct.pack("<I", len(body)) + body


def dumps(dataset: CohortDataset) -> bytes:
    parts = [MAGIC, _HEADER.pack(dataset.schema_version, len(dataset), N_CHANNELS, N_TREATMENTS, len(ICD_NAMES))]
    parts += [_encode_record(r, int(s)) for r, s in zip(dataset.records, dataset.splits)]
    blob = b"".join(parts)
    return blob + struct.pack("<I", zlib.crc32(blob))


def _nbytes_bits(n):
    return (n + 7) // 8


def _decode_record(buf, pos, n_icd):
    start = pos
    (pid, sex, split, h, death, cmo, dnr, hosp, dest, readmit, has_latent) = _FIXED.unpack_from(buf, pos)
    pos += _FIXED.size
    k = _nbytes_bits(n_icd)
    icd = np.unpackbits(np.frombuffer(buf, np.uint8, k, pos))[:n_icd].astype(bool)
    pos += k
    values = np.frombuffer(buf, "<f4", h * N_CHANNELS, pos).reshape(h, N_CHANNELS).astype(np.float32)
    pos += 4 * h * N_CHANNELS
    k = _nbytes_bits(h * N_CHANNELS)
    measured = np.unpackbits(np.frombuffer(buf, np.uint8, k, pos))[:h * N_CHANNELS].reshape(h, N_CHANNELS).astype(bool)
    pos += k
    k = _nbytes_bits(h * N_TREATMENTS)
    treatments = np.unpackbits(np.frombuffer(buf, np.uint8, k, pos))[:h * N_TREATMENTS].reshape(h, N_TREATMENTS).astype(bool)
    pos += k
    latent = None
    if has_latent:
        latent = np.frombuffer(buf, "<f4", h, pos).astype(np.float32)
        pos += 4 * h
    if sex > 1 or (dest != UNASSIGNED and dest >= len(DISCHARGE_NAMES)):
        raise SchemaError(f"patient {pid}: field out of range")
    rec = PatientRecord(
        patient_id=pid,
        sex="F" if sex == 0 else "M",
        values=values,
        measured=measured,
        treatments=treatments,
        death_hour=None if death < 0 else death,
        discharge_location=None if dest == UNASSIGNED else DISCHARGE_NAMES[dest],
        in_hospital_death=bool(hosp),
        cmo_hour=None if cmo < 0 else cmo,
        dnr_hour=None if dnr < 0 else dnr,
        icd=icd,
        readmit_days=None if math.isnan(readmit) else readmit,
        latent=latent,
    )
    return rec, split, pos - start


def loads(blob: bytes) -> CohortDataset:
    if not blob.startswith(MAGIC):
        raise SchemaError("not an MTLD1 dataset (bad magic)")
    if len(blob) < len(MAGIC) + _HEADER.size + 4:
        raise SchemaError("dataset truncated inside the header")
    body, trailer = blob[:-4], blob[-4:]
    pos = len(MAGIC)
    version, n, n_ch, n_tr, n_icd = _HEADER.unpack_from(blob, pos)
    if version != SCHEMA_VERSION:
        raise SchemaError(f"dataset schema version {version}, this build reads {SCHEMA_VERSION}")
    if (n_ch, n_tr, n_icd) != (N_CHANNELS, N_TREATMENTS, len(ICD_NAMES)):
        raise SchemaError(f"dataset dimensions {(n_ch, n_tr, n_icd)} do not match the schema")
    if struct.unpack("<I", trailer)[0] != zlib.crc32(body):
        # distinguish a short file from a corrupted one
        expected = _declared_length(body, n)
        if expected is not None and expected > len(body):
            raise SchemaError("dataset truncated")
        raise ChecksumError("dataset checksum mismatch")
    pos += _HEADER.size
    records, splits = [], []
    try:
        for _ in range(n):
            (blen,) = struct.unpack_from("<I", body, pos)
            pos += 4
            if pos + blen > len(body):
                raise SchemaError("dataset truncated inside a patient block")
            rec, split, used = _decode_record(body, pos, n_icd)
            if used != blen:
                raise SchemaError(f"patient {rec.patient_id}: block length {blen} != decoded {used}")
            pos += blen
            records.append(rec)
            splits.append(split)
    except (struct.error, ValueError) as exc:
        if isinstance(exc, DataError):
            raise
        raise SchemaError(f"malformed dataset: {exc}") from None
    if pos != len(body):
        raise SchemaError("trailing bytes after the last patient block")
    return CohortDataset(records, np.array(splits, dtype=np.uint8), version)


def _declared_length(body, n):
    pos = len(MAGIC) + _HEADER.size
    try:
        for _ in range(n):
            (blen,) = struct.unpack_from("<I", body, pos)
            pos += 4 + blen
    except struct.error:
        return math.inf
    return pos


def save_dataset(path, dataset):
    atomic_write(path, dumps(dataset))


def load_dataset(path) -> CohortDataset:
    with open(path, "rb") as fh:
        return loads(fh.read())


# ---------------------------------------------------------------- CSV export

def export_csv(dataset, directory):
    """Write ``hours.csv`` (one row per patient-hour) and ``static.csv``.

    Unmeasured channel cells are left empty.
    """
    os.makedirs(directory, exist_ok=True)
    hours_path = os.path.join(directory, "hours.csv")
    static_path = os.path.join(directory, "static.csv")
    with open(hours_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["patient_id", "hour", *CHANNEL_NAMES, *TREATMENTS])
        for rec in dataset.records:
            for h in range(rec.stay_hours):
                vals = [repr(float(v)) if m else "" for v, m in zip(rec.values[h], rec.measured[h])]
                w.writerow([rec.patient_id, h, *vals, *(int(x) for x in rec.treatments[h])])
    with open(static_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["patient_id", "split", "sex", "stay_hours", "death_hour", "in_hospital_death",
                    "discharge_location", "cmo_hour", "dnr_hour", "readmit_days",
                    *(f"icd:{n}" for n in ICD_NAMES)])
        for rec, s in zip(dataset.records, dataset.splits):
            w.writerow([
                rec.patient_id, SPLITS[s] if s != UNASSIGNED else "", rec.sex, rec.stay_hours,
                "" if rec.death_hour is None else rec.death_hour, int(rec.in_hospital_death),
                rec.discharge_location or "", "" if rec.cmo_hour is None else rec.cmo_hour,
                "" if rec.dnr_hour is None else rec.dnr_hour,
                "" if rec.readmit_days is None else rec.readmit_days,
                *(int(b) for b in rec.icd),
            ])
    return hours_path, static_path
