"""Achieved cohort statistics versus calibration targets.

Statistics accumulate in one streaming pass so that a 20k-patient cohort
never has to sit in memory. Rolling-task label rates count every hourly
anchor from ``MIN_HISTORY`` to the end of the stay, the way the reference
label counts were tallied.
"""
from __future__ import annotations

import time
from collections import Counter

import numpy as np

from ..schema import ACUITY_NAMES, CHANNEL_NAMES, DISCHARGE_NAMES, ICD_NAMES, NO_DISCHARGE, N_CHANNELS
from ..tasks.labels import label_static
from ..tasks.specs import MIN_HISTORY, TASKS_BY_NAME, get_task
from .generator import CalibrationTargets, iter_patients

_ROLLING = ("MOR-24", "MOR-48", "CMO-24", "CMO-48", "DNR-24", "DNR-48")
_DIS_INDEX = {name: i for i, name in enumerate(DISCHARGE_NAMES)}


def _rolling_counts(event, anchors, gap, horizon):
    """(positives, negatives) over ``anchors`` for one event time; masked anchors drop out."""
    if event is None:
        return 0, len(anchors)
    live = anchors[event > anchors + gap]
    pos = int(np.sum(event <= live + gap + horizon))
    return pos, len(live) - pos


class CalibrationAccumulator:
    """Streaming counters; feed records with :meth:`add`, read :meth:`summary`."""

    def __init__(self):
        self.n = 0
        self.female = 0
        self.icu_deaths = 0
        self.hosp_deaths = 0
        self.patient_hours = 0
        self.measured = np.zeros(N_CHANNELS)
        self.rolling = {name: Counter() for name in _ROLLING}
        self.dis = {name: Counter() for name in ("DIS-24", "DIS-48")}
        self.static_n = 0
        self.los_pos = 0
        self.icd = np.zeros(len(ICD_NAMES))
        self.acu = Counter()
        self.rea_pos = 0

    def add(self, rec):
        self.n += 1
        self.female += rec.sex == "F"
        self.icu_deaths += rec.died_in_icu
        self.hosp_deaths += rec.in_hospital_death
        self.patient_hours += rec.stay_hours
        self.measured += rec.measured.sum(axis=0)
        anchors = np.arange(MIN_HISTORY, rec.stay_hours)
        events = {"MOR": rec.death_hour, "CMO": rec.cmo_hour, "DNR": rec.dnr_hour}
        for name in _ROLLING:
            task = TASKS_BY_NAME[name]
            pos, neg = _rolling_counts(events[task.category], anchors, task.gap_hours, task.horizon_hours)
            self.rolling[name][1] += pos
            self.rolling[name][0] += neg
        for name, counts in self.dis.items():
            task = TASKS_BY_NAME[name]
            d = rec.stay_hours
            if rec.discharge_location is None:
                counts[0] += len(anchors)
                continue
            live = anchors[d > anchors + task.gap_hours]
            hit = int(np.sum(d <= live + task.gap_hours + task.horizon_hours))
            counts[_DIS_INDEX[rec.discharge_location]] += hit
            counts[0] += len(live) - hit
        lab = label_static(rec)
        if lab is not None:
            self.static_n += 1
            self.los_pos += lab["los"]
            self.icd += lab["icd"]
            self.acu[lab["acu"]] += 1
        self.rea_pos += rec.readmit_within_30d

    def summary(self):
        out = {"patients": self.n}
        n = max(self.n, 1)
        out["female_rate"] = self.female / n
        out["icu_mortality"] = self.icu_deaths / n
        out["hospital_mortality"] = self.hosp_deaths / n
        out["mean_stay_hours"] = self.patient_hours / n
        rates = self.measured / max(self.patient_hours, 1)
        for name, r in zip(CHANNEL_NAMES, rates):
            out[f"measured:{name}"] = float(r)
        for name, counts in self.rolling.items():
            tot = sum(counts.values())
            out[f"mca:{name}"] = max(counts.values()) / tot if tot else float("nan")
        for name, counts in self.dis.items():
            tot = sum(counts.values())
            out[f"no_discharge:{name}"] = counts[0] / tot if tot else float("nan")
            out[f"mca:{name}"] = max(counts.values()) / tot if tot else float("nan")
        s = max(self.static_n, 1)
        out["static_patients"] = self.static_n
        out["long_stay_rate"] = self.los_pos / s
        out["mca:LOS"] = max(self.los_pos, self.static_n - self.los_pos) / s
        for name, c in zip(ICD_NAMES, self.icd / s):
            out[f"icd:{name}"] = float(c)
        out["mca:ICD"] = float(np.mean(np.maximum(self.icd, self.static_n - self.icd) / s))
        for i, name in enumerate(ACUITY_NAMES):
            out[f"acuity:{name}"] = self.acu[i] / s
        out["mca:ACU"] = max(self.acu.values()) / s if self.acu else float("nan")
        out["readmit_rate"] = self.rea_pos / n
        out["mca:REA"] = max(self.rea_pos, self.n - self.rea_pos) / n
        return out


def calibration_report(seed, n_patients, targets=None):
    """Generate ``n_patients`` in streaming mode and summarise them.

    Returns ``(summary, elapsed_seconds)``.
    """
    targets = targets or CalibrationTargets()
    start = time.perf_counter()
    acc = CalibrationAccumulator()
    for rec in iter_patients(seed, n_patients, targets):
        acc.add(rec)
    return acc.summary(), time.perf_counter() - start


def reference_values():
    """Published reference statistics the summary keys are compared against."""
    ref = {f"mca:{t.name}": t.mca_target for t in TASKS_BY_NAME.values() if t.mca_target is not None}
    ref["mca:ICD"] = get_task("ICD").mca_target
    targets = CalibrationTargets()
    ref["icu_mortality"] = targets.icu_mortality
    ref["hospital_mortality"] = targets.hospital_mortality
    ref["long_stay_rate"] = targets.long_stay_rate
    ref["readmit_rate"] = targets.readmit_rate
    ref["female_rate"] = targets.female_rate
    for name, r in targets.icd_rates:
        ref[f"icd:{name}"] = r
    for name, r in targets.measurement_rates:
        ref[f"measured:{name}"] = r
    ref["no_discharge:DIS-24"] = 0.730
    ref["no_discharge:DIS-48"] = 0.473
    return ref


def write_manifest(path, summary, targets=None, seed=None):
    """Key-value text: one ``key<TAB>target<TAB>achieved`` line per statistic."""
    ref = reference_values()
    lines = [f"# calibration manifest seed={seed}"]
    for key in sorted(summary):
        target = ref.get(key)
        tgt = "" if target is None else f"{target:.6g}"
        lines.append(f"{key}\t{tgt}\t{summary[key]:.6g}")
    if targets is not None:
        for key, val in sorted(targets.to_dict().items()):
            if not isinstance(val, list):
                lines.append(f"param:{key}\t\t{val}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_manifest(path):
    out = {}
    with open(path) as fh:
        for line in fh:
            if line.startswith("#") or not line.strip():
                continue
            key, target, achieved = line.rstrip("\n").split("\t")
            out[key] = (float(target) if target else None, achieved)
    return out


__all__ = ["CalibrationAccumulator", "calibration_report", "reference_values",
           "write_manifest", "read_manifest", "NO_DISCHARGE"]
