"""Synthetic cohort generation, persistence, splits and subsampling."""
from .calibration import CalibrationAccumulator, calibration_report, read_manifest, write_manifest
from .dataset import (
    FEW_SHOT_GRID,
    SPLITS,
    CohortDataset,
    SubsampleSpec,
    export_csv,
    generate_cohort,
    load_dataset,
    sample_training_window,
    save_dataset,
    split_patients,
    split_sizes,
    subsample,
)
from .generator import CalibrationTargets, generate_records, iter_patients
from .records import PatientRecord

__all__ = [
    "CalibrationAccumulator", "CalibrationTargets", "CohortDataset", "FEW_SHOT_GRID",
    "PatientRecord", "SPLITS", "SubsampleSpec", "calibration_report", "export_csv",
    "generate_cohort", "generate_records", "iter_patients", "load_dataset", "read_manifest",
    "sample_training_window", "save_dataset", "split_patients", "split_sizes", "subsample",
    "write_manifest",
]
