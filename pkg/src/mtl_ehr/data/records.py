from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import DataError, UsageError
from ..schema import (
    ACUITY_OF_DESTINATION,
    DESTINATIONS,
    IN_HOSPITAL_MORTALITY,
    IN_ICU_MORTALITY,
    N_CHANNELS,
    N_FEATURES,
    N_TREATMENTS,
)


@dataclass(eq=False)
class PatientRecord:
    """One ICU stay on an hourly grid.

    Hour ``h`` covers ``[h, h+1)``; the stay ends at ``stay_hours``, which is
    also the discharge (or death) time. ``values`` are standardised and
    hold 0 wherever ``measured`` is false.
    """

    patient_id: int
    sex: str
    values: np.ndarray
    measured: np.ndarray
    treatments: np.ndarray
    death_hour: Optional[int]
    discharge_location: Optional[str]
    in_hospital_death: bool
    cmo_hour: Optional[int]
    dnr_hour: Optional[int]
    icd: np.ndarray
    readmit_days: Optional[float]
    latent: Optional[np.ndarray] = None
    _features: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        d = self.values.shape[0]
        if self.values.shape != (d, N_CHANNELS) or self.measured.shape != (d, N_CHANNELS):
            raise DataError(f"patient {self.patient_id}: channel block must be [hours x {N_CHANNELS}]")
        if self.treatments.shape != (d, N_TREATMENTS):
            raise DataError(f"patient {self.patient_id}: treatment block must be [hours x {N_TREATMENTS}]")
        if self.sex not in ("F", "M"):
            raise DataError(f"patient {self.patient_id}: sex must be 'F' or 'M'")
        if self.death_hour is not None:
            if self.death_hour != d:
                raise DataError(f"patient {self.patient_id}: death hour must equal stay end")
            if self.discharge_location is not None or self.in_hospital_death:
                raise DataError(f"patient {self.patient_id}: ICU death excludes a discharge outcome")
        elif self.in_hospital_death:
            if self.discharge_location is not None:
                raise DataError(f"patient {self.patient_id}: in-hospital death has no discharge location")
        elif self.discharge_location not in DESTINATIONS:
            raise DataError(f"patient {self.patient_id}: unknown discharge location {self.discharge_location!r}")
        if (self.death_hour is not None or self.in_hospital_death) and self.readmit_days is not None:
            raise DataError(f"patient {self.patient_id}: a patient who died cannot be readmitted")

    @property
    def stay_hours(self) -> int:
        return self.values.shape[0]

    @property
    def discharge_hour(self) -> int:
        return self.stay_hours

    @property
    def died_in_icu(self) -> bool:
        return self.death_hour is not None

    @property
    def readmit_within_30d(self) -> bool:
        return self.readmit_days is not None and self.readmit_days <= 30

    @property
    def acuity(self) -> str:
        if self.died_in_icu:
            return IN_ICU_MORTALITY
        if self.in_hospital_death:
            return IN_HOSPITAL_MORTALITY
        return ACUITY_OF_DESTINATION[self.discharge_location]

    def imputed_values(self) -> np.ndarray:
        """Last observation carried forward, else 0 (the standardised mean)."""
        d = self.stay_hours
        idx = np.where(self.measured, np.arange(d)[:, None], -1)
        np.maximum.accumulate(idx, axis=0, out=idx)
        out = np.take_along_axis(self.values, np.maximum(idx, 0), axis=0)
        return np.where(idx >= 0, out, 0.0).astype(np.float32)

    def features(self) -> np.ndarray:
        """Per-hour model input ``[hours x N_FEATURES]``: imputed values, mask, treatments."""
        if self._features is None:
            self._features = np.concatenate(
                [self.imputed_values(), self.measured.astype(np.float32), self.treatments.astype(np.float32)],
                axis=1,
            )
        return self._features

    def window(self, anchor: int, hours: int):
        """Input hours ``[anchor-hours, anchor)``, left-padded with zeros.

        Returns ``(x [hours x N_FEATURES], valid [hours])``.
        """
        if anchor < 1 or anchor > self.stay_hours:
            raise UsageError(f"anchor {anchor} outside stay of {self.stay_hours}h")
        feats = self.features()
        start = anchor - hours
        x = np.zeros((hours, N_FEATURES), dtype=np.float64)
        valid = np.zeros(hours, dtype=bool)
        lo = max(start, 0)
        x[lo - start:] = feats[lo:anchor]
        valid[lo - start:] = True
        return x, valid
