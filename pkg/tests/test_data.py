import csv
import math
import struct
import zlib
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from mtl_ehr.data import (
    CalibrationTargets,
    CohortDataset,
    SubsampleSpec,
    export_csv,
    generate_cohort,
    generate_records,
    load_dataset,
    sample_training_window,
    save_dataset,
    split_patients,
    split_sizes,
    subsample,
)
from mtl_ehr.data import calibration
from mtl_ehr.data.dataset import FEW_SHOT_GRID, dumps, loads
from mtl_ehr.errors import CalibrationError, ChecksumError, ConfigError, DataError, SchemaError
from mtl_ehr.schema import DISCHARGE_NAMES, SCHEMA_VERSION
from mtl_ehr.tasks import get_task, label_rolling_event, sample_eval_points

from _oracles import pairwise_auroc
from _records import make_record


@pytest.fixture(scope="module")
def cohort():
    return generate_cohort(11, 400)


# --- generation ----------------------------------------------------------

def test_same_seed_gives_bit_identical_dataset():
    a = dumps(generate_cohort(3, 120))
    b = dumps(generate_cohort(3, 120))
    assert a == b
    assert a != dumps(generate_cohort(4, 120))


def test_parallel_generation_matches_serial():
    assert dumps(generate_cohort(3, 120, jobs=2)) == dumps(generate_cohort(3, 120))


def test_tiny_cohort_is_rejected():
    with pytest.raises(ConfigError):
        generate_cohort(0, 99)


@pytest.mark.parametrize("field,value", [("icu_mortality", 1.2), ("readmit_rate", -0.1),
                                         ("dnr_rate", float("inf"))])
def test_infeasible_targets_raise_calibration_error(field, value):
    with pytest.raises(CalibrationError):
        generate_cohort(0, 100, replace(CalibrationTargets(), **{field: value}))


def test_icd_rate_outside_unit_interval_is_infeasible():
    rates = list(CalibrationTargets().icd_rates)
    rates[0] = ("Circulatory", 1.5)
    with pytest.raises(CalibrationError):
        CalibrationTargets(icd_rates=tuple(rates)).validate()


def test_targets_round_trip_through_dict():
    t = replace(CalibrationTargets(), adversarial="ICD")
    assert CalibrationTargets.from_dict(t.to_dict()) == t


def test_outcomes_are_consistent(cohort):
    for r in cohort.records:
        if r.died_in_icu:
            assert r.acuity == "In ICU Mortality" and r.readmit_days is None
        assert r.cmo_hour is None or 0 <= r.cmo_hour < r.stay_hours
        assert r.dnr_hour is None or 0 <= r.dnr_hour < r.stay_hours
        assert 24 <= r.stay_hours <= 240


def test_channels_are_standardised_over_measured_entries(cohort):
    vals = np.concatenate([r.values[r.measured] for r in cohort.records])
    assert abs(vals.mean()) < 0.1
    assert abs(vals.var() - 1.0) < 0.15


def test_unmeasured_entries_hold_zero(cohort):
    for r in cohort.records[:50]:
        assert np.all(r.values[~r.measured] == 0)


def test_latent_severity_predicts_mortality(cohort):
    # logistic probe on a single feature: its AUROC is the AUROC of the feature
    xs, ys = [], []
    task = get_task("MOR-24")
    for r in cohort.records:
        for t in sample_eval_points(r, task, 0):
            y = label_rolling_event(r, "death", t, 2, 24)
            if y is not None:
                xs.append(r.latent[t - 1])
                ys.append(y)
    assert sum(ys) > 10
    assert pairwise_auroc(xs, ys) >= 0.85


def test_adversarial_icd_follows_an_independent_latent():
    base = generate_records(5, 1500)
    adv = generate_records(5, 1500, replace(CalibrationTargets(), adversarial="ICD"))
    mean_sev = np.array([r.latent.mean() for r in base])
    circ = np.array([r.icd[0] for r in base])
    adv_circ = np.array([r.icd[0] for r in adv])
    adv_sev = np.array([r.latent.mean() for r in adv])
    assert pairwise_auroc(mean_sev, circ) > 0.6
    assert abs(pairwise_auroc(adv_sev, adv_circ) - 0.5) < 0.05


def test_streaming_calibration_summary():
    summary, elapsed = calibration.calibration_report(2, 300)
    assert summary["patients"] == 300
    assert 0.9 < summary["mca:MOR-24"] <= 1.0
    assert elapsed > 0


def test_calibration_manifest_round_trip(tmp_path):
    summary, _ = calibration.calibration_report(2, 150)
    path = tmp_path / "calibration.txt"
    calibration.write_manifest(path, summary, CalibrationTargets(), seed=2)
    back = calibration.read_manifest(path)
    target, achieved = back["mca:MOR-24"]
    assert target == 0.98
    assert float(achieved) == pytest.approx(summary["mca:MOR-24"], rel=1e-5)


# --- splits --------------------------------------------------------------

def test_split_sizes_of_the_reference_cohort():
    assert split_sizes(21876) == (17500, 2188, 2188)
    assert split_sizes(10) == (8, 1, 1)


def test_split_too_small_raises():
    with pytest.raises(DataError):
        split_sizes(3)
    with pytest.raises(ConfigError):
        split_sizes(100, (50, 20, 20))


@settings(max_examples=30, deadline=None)
@given(n=st.integers(10, 3000), seed=st.integers(0, 1000))
def test_split_is_a_deterministic_partition(n, seed):
    class Fake:
        def __len__(self):
            return n

    codes = split_patients(Fake(), seed=seed)
    assert sorted(np.bincount(codes, minlength=3).tolist()) == sorted(split_sizes(n))
    np.testing.assert_array_equal(codes, split_patients(Fake(), seed=seed))


def test_no_patient_in_two_splits(cohort):
    ids = [{r.patient_id for r in cohort.split(s)} for s in ("train", "tune", "test")]
    assert not (ids[0] & ids[1] or ids[0] & ids[2] or ids[1] & ids[2])
    assert sum(len(s) for s in ids) == len(cohort)


# --- training windows ----------------------------------------------------

def test_window_equal_to_stay_always_starts_at_zero(rng):
    rec = make_record(hours=48)
    assert {sample_training_window(rec, 48, rng) for _ in range(50)} == {(0, 48)}


def test_window_start_is_uniform(rng):
    rec = make_record(hours=100)
    starts = np.array([sample_training_window(rec, 48, rng)[0] for _ in range(10_000)])
    assert starts.min() == 0 and starts.max() == 52
    counts = np.bincount(starts, minlength=53)
    assert stats.chisquare(counts).pvalue > 0.01


def test_short_stay_is_left_padded(rng):
    rec = make_record(hours=30)
    start, end = sample_training_window(rec, 48, rng)
    assert (start, end) == (-18, 30)
    x, valid = rec.window(end, 48)
    assert valid[:18].sum() == 0 and valid[18:].all()
    assert np.all(x[:18] == 0)


def test_window_hours_out_of_range(rng):
    with pytest.raises(ConfigError):
        sample_training_window(make_record(hours=30), 200, rng)


def test_imputation_keeps_measured_values():
    rec = make_record(hours=30, seed=8)
    imp = rec.imputed_values()
    np.testing.assert_array_equal(imp[rec.measured], rec.values[rec.measured])
    # forward fill: an unmeasured hour repeats the last measurement
    c = 0
    hours = np.flatnonzero(rec.measured[:, c])
    if len(hours) and hours[0] + 1 < 30 and not rec.measured[hours[0] + 1, c]:
        assert imp[hours[0] + 1, c] == rec.values[hours[0], c]


# --- subsampling ---------------------------------------------------------

def _train(n, female_every=3):
    return [make_record(hours=40, pid=i, sex="F" if i % female_every == 0 else "M") for i in range(n)]


def test_one_percent_of_reference_train_split():
    train = list(range(17500))
    assert len(subsample(train, SubsampleSpec("few-shot", 0.01, seed=0))) == 175


def test_full_fraction_is_identity():
    train = _train(30)
    assert subsample(train, SubsampleSpec("few-shot", 1.0)) == train
    assert subsample(train, SubsampleSpec()) == train


def test_total_female_removal():
    train = _train(30)
    out = subsample(train, SubsampleSpec("imbalanced", 1.0, seed=2))
    assert all(r.sex == "M" for r in out)
    assert len(out) == sum(r.sex == "M" for r in train)


def test_partial_female_removal_counts():
    train = _train(30)  # ten female
    out = subsample(train, SubsampleSpec("imbalanced", 0.5, seed=2))
    assert sum(r.sex == "F" for r in out) == 5


def test_empty_result_is_an_error():
    with pytest.raises(DataError):
        subsample(list(range(10)), SubsampleSpec("few-shot", 0.01))


def test_bad_fraction_is_a_config_error():
    with pytest.raises(ConfigError):
        SubsampleSpec("few-shot", 0.0)
    with pytest.raises(ConfigError):
        SubsampleSpec("few-shot", 1.5)


def test_default_grid():
    assert len(FEW_SHOT_GRID) == 13 and FEW_SHOT_GRID[-1] == 1.0


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 500), f=st.floats(0.01, 1.0), seed=st.integers(0, 99))
def test_few_shot_keeps_a_subset(n, f, seed):
    train = list(range(n))
    k = round(f * n)
    if k == 0:
        with pytest.raises(DataError):
            subsample(train, SubsampleSpec("few-shot", f, seed))
        return
    out = subsample(train, SubsampleSpec("few-shot", f, seed))
    assert len(out) == k and len(set(out)) == k and out == sorted(out)


# --- persistence ---------------------------------------------------------

def _same(a, b):
    assert len(a) == len(b)
    np.testing.assert_array_equal(a.splits, b.splits)
    for x, y in zip(a.records, b.records):
        for f in ("values", "measured", "treatments", "icd"):
            np.testing.assert_array_equal(getattr(x, f), getattr(y, f))
        for f in ("patient_id", "sex", "death_hour", "discharge_location", "in_hospital_death",
                  "cmo_hour", "dnr_hour", "readmit_days"):
            assert getattr(x, f) == getattr(y, f)


def test_round_trip_is_bit_identical(tmp_path, cohort):
    path = tmp_path / "c.mtld"
    save_dataset(path, cohort)
    back = load_dataset(path)
    _same(cohort, back)
    assert dumps(back) == path.read_bytes()


def test_corrupted_byte_fails_checksum(cohort):
    blob = bytearray(dumps(cohort))
    blob[len(blob) // 2] ^= 0xFF
    with pytest.raises(ChecksumError):
        loads(bytes(blob))


def test_truncated_file_is_schema_error(cohort):
    blob = dumps(cohort)
    with pytest.raises(SchemaError):
        loads(blob[: len(blob) // 3])


def test_bad_magic_and_version(cohort):
    blob = bytearray(dumps(cohort))
    with pytest.raises(SchemaError):
        loads(b"XXXXX" + bytes(blob[5:]))
    blob[5:7] = struct.pack("<H", SCHEMA_VERSION + 1)
    with pytest.raises(SchemaError, match="version"):
        loads(bytes(blob))


def _hand_written_file(rng):
    """Three patients serialised directly from the documented layout."""
    out = [b"MTLD1", struct.pack("<HIIII", 1, 3, 56, 3, 18)]
    specs = [(101, 0, 0, 40, 40, -1, 30, 0, 255, math.nan),
             (102, 1, 1, 60, -1, -1, -1, 0, DISCHARGE_NAMES.index("Home"), 12.5),
             (103, 1, 2, 50, -1, 20, 5, 1, 255, math.nan)]
    for pid, sex, split, h, death, cmo, dnr, hosp, dest, readmit in specs:
        measured = rng.random((h, 56)) < 0.4
        values = np.where(measured, rng.normal(size=(h, 56)), 0).astype("<f4")
        treatments = rng.random((h, 3)) < 0.2
        body = struct.pack("<qBBIiiiBBdB", pid, sex, split, h, death, cmo, dnr, hosp, dest, readmit, 0)
        body += bytes([0b10100000, 0, 0])
        body += values.tobytes()
        body += np.packbits(measured.ravel()).tobytes()
        body += np.packbits(treatments.ravel()).tobytes()
        out.append(struct.pack("<I", len(body)) + body)
    blob = b"".join(out)
    return blob + struct.pack("<I", zlib.crc32(blob))


def test_externally_written_file_loads(rng):
    ds = loads(_hand_written_file(rng))
    assert [r.patient_id for r in ds.records] == [101, 102, 103]
    assert ds.records[0].died_in_icu and ds.records[0].dnr_hour == 30
    assert ds.records[1].discharge_location == "Home" and ds.records[1].readmit_days == 12.5
    assert ds.records[2].in_hospital_death and ds.records[2].cmo_hour == 20
    assert ds.records[0].icd[:3].tolist() == [True, False, True]
    assert ds.split_sizes() == {"train": 1, "tune": 1, "test": 1}


def test_duplicate_ids_rejected():
    with pytest.raises(DataError):
        CohortDataset([make_record(pid=1), make_record(pid=1)])


def test_csv_export(tmp_path, rng):
    ds = loads(_hand_written_file(rng))
    hours_path, static_path = export_csv(ds, tmp_path)
    with open(hours_path) as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 1 + 40 + 60 + 50
    assert len(rows[0]) == 2 + 56 + 3
    rec = ds.records[0]
    c = int(np.flatnonzero(rec.measured[0])[0])
    assert float(rows[1][2 + c]) == pytest.approx(float(rec.values[0, c]))
    with open(static_path) as fh:
        static = list(csv.DictReader(fh))
    assert static[1]["discharge_location"] == "Home"
    assert static[0]["death_hour"] == "40"
