"""Synthetic ICU cohort calibrated to published marginal statistics.

Each patient carries a baseline severity and an hourly severity path (a
mean-reverting random walk). The baseline tilts every outcome probability
(ICU and in-hospital death, stay length, order placement, ICD categories,
readmission, discharge destination); the path drives measurement
frequency, standardised channel values and treatment on/off hazards, and
climbs towards an ICU death. Because one latent feeds every task, signal
transfers between tasks by construction.

Patients are generated independently from ``SeedSequence([seed, index])``
so a cohort can be produced in any order, in parallel, or streamed.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from typing import Optional

import numpy as np
from scipy import optimize, signal, special, stats

from ..errors import CalibrationError, ConfigError
from ..schema import (
    ACUITY_LABELS,
    CHANNELS,
    ICD_CATEGORIES,
    IN_HOSPITAL_MORTALITY,
    IN_ICU_MORTALITY,
    N_CHANNELS,
)
from .records import PatientRecord

_GH_X, _GH_W = np.polynomial.hermite_e.hermegauss(64)
_GH_W = _GH_W / _GH_W.sum()

# destinations that skew towards sicker patients
_SICK_DESTINATIONS = {
    "Skilled Nursing Facility (SNF)", "Long Term Care Hospital", "Hospice-Home",
    "Hospice-Medical Facility", "Snf-Medicaid Only Certif", "Integrated Care Facility (ICF)",
}
_WELL_DESTINATIONS = {"Home", "Left Against Medical Advice", "Discharge-Transfer To Psych Hospital"}


@dataclass(frozen=True)
class CalibrationTargets:
    """Patient-level rates the generator reproduces, plus shape constants.

    Rates are fractions. Anchor-level majority-class accuracies are emergent
    and checked by :func:`mtl_ehr.data.calibration.calibration_report`.
    """

    icu_mortality: float = 0.074
    hospital_mortality: float = 0.037
    long_stay_rate: float = 0.529
    female_rate: float = 0.44
    readmit_rate: float = 0.050
    late_readmit_rate: float = 0.04
    cmo_given_icu_death: float = 0.40
    cmo_given_hospital_death: float = 0.10
    cmo_survivor: float = 0.001
    dnr_rate: float = 0.10
    dnr_at_admission: float = 0.55
    icd_rates: tuple = tuple((name, pct / 100.0) for name, pct in ICD_CATEGORIES)
    measurement_rates: tuple = tuple((name, pct / 100.0) for name, pct in CHANNELS)
    destination_rates: tuple = tuple(
        (dest, pct / 100.0) for _, pct, dest in ACUITY_LABELS if dest is not None)
    min_stay: int = 24
    max_stay: int = 240
    # log stay is split-normal: narrow below the median, long right tail
    stay_log_sd_low: float = 0.35
    stay_log_sd_high: float = 1.0
    # shape of the latent path
    severity_persistence: float = 0.96
    severity_noise: float = 0.12
    death_ramp: float = 2.6
    recovery_drop: float = 0.7
    # how strongly baseline severity tilts outcomes
    death_slope: float = 1.4
    stay_slope: float = 0.25
    icd_slope: float = 0.6
    readmit_slope: float = 0.6
    measurement_slope: float = 0.2
    # channel mixing: severity loading range, and the variance share of
    # persistent per-patient nuisance factors that severity must be told from
    severity_loading: tuple = (0.15, 0.3)
    nuisance_factors: int = 4
    nuisance_share: float = 0.85
    # a category whose labels follow an independent latent instead of severity
    adversarial: Optional[str] = None

    def validate(self):
        rates = {
            "icu_mortality": self.icu_mortality,
            "hospital_mortality": self.hospital_mortality,
            "long_stay_rate": self.long_stay_rate,
            "female_rate": self.female_rate,
            "readmit_rate": self.readmit_rate,
            "late_readmit_rate": self.late_readmit_rate,
            "cmo_given_icu_death": self.cmo_given_icu_death,
            "cmo_given_hospital_death": self.cmo_given_hospital_death,
            "cmo_survivor": self.cmo_survivor,
            "dnr_rate": self.dnr_rate,
            "dnr_at_admission": self.dnr_at_admission,
        }
        rates.update({f"icd:{k}": v for k, v in self.icd_rates})
        rates.update({f"measured:{k}": v for k, v in self.measurement_rates})
        rates.update({f"destination:{k}": v for k, v in self.destination_rates})
        for key, val in rates.items():
            if not 0.0 <= val <= 1.0:
                raise CalibrationError(f"target {key}={val} is not a probability")
        if self.icu_mortality + self.hospital_mortality >= 1.0:
            raise CalibrationError("mortality targets leave no survivors")
        lo, hi = self.severity_loading
        if not (0.0 <= lo <= hi < 1.0 and 0.0 <= self.nuisance_share < 1.0 and self.nuisance_factors >= 0):
            raise CalibrationError("channel mixing needs loadings in [0, 1) and a nuisance share in [0, 1)")
        alive = 1.0 - self.icu_mortality - self.hospital_mortality
        if self.readmit_rate > alive:
            raise CalibrationError("readmission target exceeds the surviving fraction")
        if sum(v for _, v in self.destination_rates) <= 0:
            raise CalibrationError("destination rates are all zero")
        if not 0 < self.min_stay < 72 < self.max_stay:
            raise CalibrationError("stay bounds must bracket the 72h long-stay threshold")
        if self.adversarial not in (None, "ICD", "LOS", "REA"):
            raise ConfigError(f"adversarial mode not supported for {self.adversarial!r}")
        return self

    def to_dict(self):
        out = {}
        for f in fields(self):
            val = getattr(self, f.name)
            if isinstance(val, tuple):
                val = [list(x) if isinstance(x, tuple) else x for x in val]
            out[f.name] = val
        return out

    @classmethod
    def from_dict(cls, d):
        kw = {}
        for f in fields(cls):
            if f.name in d:
                val = d[f.name]
                if isinstance(val, list):
                    val = tuple(tuple(x) if isinstance(x, list) else x for x in val)
                kw[f.name] = val
        return cls(**kw).validate()


def _intercept_for_rate(rate, slope, weights=None):
    """Intercept ``a`` with E[sigmoid(a + slope*Z)] = rate for Z ~ N(0, 1).

    ``weights`` optionally reweights the quadrature nodes (a conditional
    distribution of Z).
    """
    if rate <= 0.0:
        return -np.inf
    if rate >= 1.0:
        return np.inf
    w = _GH_W if weights is None else weights

    def gap(a):
        return float(w @ special.expit(a + slope * _GH_X)) - rate

    return optimize.brentq(gap, -40.0, 40.0, xtol=1e-12)


# a rounded stay of D hours satisfies D > 36 iff the continuous stay is >= 36.5
_STATIC_MIN = np.log(36.5)
_LONG_MIN = np.log(71.5)


def _p_stay_above(t, mu, bound):
    """P(log stay >= bound | baseline) at each quadrature node."""
    gap = bound - mu - t.stay_slope * _GH_X
    return stats.norm.sf(gap / np.where(gap >= 0, t.stay_log_sd_high, t.stay_log_sd_low))


def _stay_location(t):
    """Log-stay location giving the long-stay rate among static-labelled patients."""

    def gap(mu):
        return float(_GH_W @ _p_stay_above(t, mu, _LONG_MIN)) / float(
            _GH_W @ _p_stay_above(t, mu, _STATIC_MIN)) - t.long_stay_rate

    return optimize.brentq(gap, 0.0, 8.0, xtol=1e-12)


def _static_weights(t, mu):
    w = _GH_W * _p_stay_above(t, mu, _STATIC_MIN)
    return w / w.sum()


@dataclass
class _Plan:
    """Derived per-cohort constants (intercepts, loadings) shared by all patients."""

    targets: CalibrationTargets
    death_a: float = 0.0
    hosp_a: float = 0.0
    readmit_a: float = 0.0
    dnr_a: float = 0.0
    stay_mu: float = 0.0
    icd_a: np.ndarray = field(default=None)
    icd_slope: np.ndarray = field(default=None)
    meas_a: np.ndarray = field(default=None)
    loadings: np.ndarray = field(default=None)
    nuisance: np.ndarray = field(default=None)
    adversarial_channels: np.ndarray = field(default=None)
    dest_names: tuple = ()
    dest_logp: np.ndarray = field(default=None)
    dest_tilt: np.ndarray = field(default=None)
    sev_center: float = 0.0
    sev_scale: float = 1.0


def _plan(targets: CalibrationTargets) -> _Plan:
    t = targets.validate()
    p = _Plan(targets=t)
    p.death_a = _intercept_for_rate(t.icu_mortality, t.death_slope)
    p.hosp_a = _intercept_for_rate(t.hospital_mortality / (1.0 - t.icu_mortality), t.death_slope * 0.5)
    alive = 1.0 - t.icu_mortality - t.hospital_mortality
    p.readmit_a = _intercept_for_rate(t.readmit_rate / alive, t.readmit_slope)
    p.dnr_a = _intercept_for_rate(t.dnr_rate, 1.0)
    p.stay_mu = _stay_location(t)
    rates = np.array([r for _, r in t.icd_rates])
    # rare categories stay untilted so their tiny rates survive
    p.icd_slope = np.where(rates > 0.05, t.icd_slope, 0.0)
    # ICD rates are quoted over patients long enough to carry static labels
    weights = None if t.adversarial == "ICD" else _static_weights(t, p.stay_mu)
    p.icd_a = np.array([_intercept_for_rate(r, s, weights) for r, s in zip(rates, p.icd_slope)])
    mrates = np.array([r for _, r in t.measurement_rates])
    p.meas_a = np.array([_intercept_for_rate(r, t.measurement_slope) for r in mrates])
    # fixed loadings with mixed signs, so no single direction is both
    # high-variance and informative
    fixed = np.random.default_rng(7)
    lo, hi = t.severity_loading
    p.loadings = fixed.uniform(lo, hi, N_CHANNELS) * fixed.choice([-1.0, 1.0], N_CHANNELS)
    k = t.nuisance_factors
    if k:
        raw = fixed.normal(size=(k, N_CHANNELS))
        p.nuisance = raw / np.linalg.norm(raw, axis=0) * np.sqrt(t.nuisance_share)
    else:
        p.nuisance = np.zeros((0, N_CHANNELS))
    p.adversarial_channels = np.arange(N_CHANNELS) % 2 == 1
    names = [d for d, _ in t.destination_rates]
    probs = np.array([r for _, r in t.destination_rates], dtype=float)
    probs = probs / probs.sum()
    p.dest_names = tuple(names)
    with np.errstate(divide="ignore"):
        p.dest_logp = np.log(probs)
    p.dest_tilt = np.array([0.4 if n in _SICK_DESTINATIONS else (-0.3 if n in _WELL_DESTINATIONS else 0.0)
                            for n in names])
    # approximate moments of the hourly path, used to standardise channels
    dev_sd = t.severity_noise / np.sqrt(1.0 - t.severity_persistence ** 2)
    p.sev_center = 0.0
    p.sev_scale = float(np.sqrt(1.0 + dev_sd ** 2))
    return p


def _ar1(rng, n, cols, rho, sd, start_sd=None):
    """AR(1) paths with stationary standard deviation ``sd``; shape ``[n, cols]``."""
    eps = rng.normal(size=(n, cols)) * sd * np.sqrt(1.0 - rho ** 2)
    eps[0] = rng.normal(size=cols) * (sd if start_sd is None else start_sd)
    return signal.lfilter([1.0], [1.0, -rho], eps, axis=0)


def _markov_onoff(rng, on_p, off_p):
    """Two-state chains per column; ``on_p``/``off_p`` are ``[hours, k]`` hazards."""
    n, k = on_p.shape
    u = rng.random((n, k))
    state = np.zeros(k, dtype=bool)
    out = np.zeros((n, k), dtype=bool)
    for h in range(n):
        state = np.where(state, u[h] >= off_p[h], u[h] < on_p[h])
        out[h] = state
    return out


def generate_patient(plan: _Plan, seed: int, index: int) -> PatientRecord:
    t = plan.targets
    rng = np.random.default_rng(np.random.SeedSequence([seed, index]))
    sex = "F" if rng.random() < t.female_rate else "M"
    base = rng.normal()
    other = rng.normal()  # independent latent, used only in adversarial mode

    icu_death = rng.random() < special.expit(plan.death_a + t.death_slope * base)
    hosp_death = (not icu_death) and rng.random() < special.expit(plan.hosp_a + 0.5 * t.death_slope * base)

    stay_driver = other if t.adversarial == "LOS" else base
    z_stay = rng.normal()
    log_stay = plan.stay_mu + t.stay_slope * stay_driver + z_stay * (
        t.stay_log_sd_high if z_stay >= 0 else t.stay_log_sd_low)
    d = int(np.clip(np.round(np.exp(log_stay)), t.min_stay, t.max_stay))

    # hourly severity path around the baseline
    hours = np.arange(d)
    path = base + _ar1(rng, d, 1, t.severity_persistence,
                       t.severity_noise / np.sqrt(1.0 - t.severity_persistence ** 2))[:, 0]
    if icu_death:
        ramp_len = rng.uniform(36.0, 72.0)
        path = path + t.death_ramp * np.clip((hours - (d - ramp_len)) / ramp_len, 0.0, 1.0) ** 1.5
    elif not hosp_death:
        path = path - t.recovery_drop * np.clip((hours - (d - 24.0)) / 24.0, 0.0, 1.0)
    z = (path - plan.sev_center) / plan.sev_scale

    # measurement and channel values
    meas_logit = plan.meas_a[None, :] + t.measurement_slope * z[:, None]
    measured = rng.random((d, N_CHANNELS)) < special.expit(meas_logit)
    measured[0, :6] |= True  # admission vitals
    noise = _ar1(rng, d, N_CHANNELS, 0.7, 1.0)
    driver = np.repeat(z[:, None], N_CHANNELS, axis=1)
    if t.adversarial is not None:
        other_path = other + _ar1(rng, d, 1, t.severity_persistence,
                                  t.severity_noise / np.sqrt(1.0 - t.severity_persistence ** 2))[:, 0]
        other_z = other_path / plan.sev_scale
        driver[:, plan.adversarial_channels] = other_z[:, None]
    lam = plan.loadings
    # nuisance factors: a per-patient offset plus slow drift, unit variance
    k = plan.nuisance.shape[0]
    factors = _ar1(rng, d, k, 0.99, 0.3) + rng.normal(size=k) * np.sqrt(1.0 - 0.09)
    residual = np.sqrt(np.maximum(1.0 - lam ** 2 - t.nuisance_share, 0.05))
    values = lam * driver + factors @ plan.nuisance + residual * noise
    values = np.where(measured, values, 0.0).astype(np.float32)

    # treatments: ventilation, vasopressors, fluid boluses
    on = special.expit(np.array([-4.5, -5.0, -3.2]) + np.array([1.2, 1.4, 0.8]) * z[:, None])
    off = special.expit(np.array([-3.0, -2.6, 0.5]) - np.array([0.8, 0.9, 0.3]) * z[:, None])
    treatments = _markov_onoff(rng, on, off)

    # care orders
    cmo_hour = None
    if icu_death:
        if rng.random() < t.cmo_given_icu_death:
            cmo_hour = int(max(1, d - int(rng.integers(1, 31))))
    elif rng.random() < (t.cmo_given_hospital_death if hosp_death else t.cmo_survivor):
        cmo_hour = int(rng.integers(1, d))
    dnr_hour = None
    if rng.random() < special.expit(plan.dnr_a + base + (2.0 if icu_death else 0.0)):
        if rng.random() < t.dnr_at_admission:
            dnr_hour = 0
        elif icu_death:
            dnr_hour = int(max(1, d - int(rng.integers(6, 97))))
        else:
            dnr_hour = int(rng.integers(1, d))

    # static outcomes
    icd_driver = other if t.adversarial == "ICD" else base
    icd_slope = plan.icd_slope * (4.0 if t.adversarial == "ICD" else 1.0)
    icd_a = plan.icd_a if t.adversarial != "ICD" else np.array(
        [_cached_intercept(r, s) for (_, r), s in zip(t.icd_rates, icd_slope)])
    icd = rng.random(len(icd_a)) < special.expit(icd_a + icd_slope * icd_driver)

    discharge_location = None
    readmit_days = None
    if not icu_death and not hosp_death:
        logits = plan.dest_logp + plan.dest_tilt * base
        probs = np.exp(logits - logits[np.isfinite(logits)].max())
        probs = probs / probs.sum()
        discharge_location = plan.dest_names[int(rng.choice(len(probs), p=probs))]
        rea_driver = other if t.adversarial == "REA" else base
        rea_slope = t.readmit_slope * (4.0 if t.adversarial == "REA" else 1.0)
        rea_a = plan.readmit_a if t.adversarial != "REA" else _cached_intercept(
            t.readmit_rate / (1.0 - t.icu_mortality - t.hospital_mortality), rea_slope)
        if rng.random() < special.expit(rea_a + rea_slope * rea_driver):
            readmit_days = float(np.round(rng.uniform(0.5, 30.0), 2))
        elif rng.random() < t.late_readmit_rate:
            readmit_days = float(np.round(rng.uniform(30.01, 365.0), 2))

    return PatientRecord(
        patient_id=int(index),
        sex=sex,
        values=values,
        measured=measured,
        treatments=treatments,
        death_hour=d if icu_death else None,
        discharge_location=discharge_location,
        in_hospital_death=bool(hosp_death),
        cmo_hour=cmo_hour,
        dnr_hour=dnr_hour,
        icd=icd,
        readmit_days=readmit_days,
        latent=path.astype(np.float32),
    )


_INTERCEPTS = {}


def _cached_intercept(rate, slope):
    key = (float(rate), float(slope))
    if key not in _INTERCEPTS:
        _INTERCEPTS[key] = _intercept_for_rate(rate, slope)
    return _INTERCEPTS[key]


def iter_patients(seed: int, n_patients: int, targets: Optional[CalibrationTargets] = None, start: int = 0):
    """Yield patients ``start .. n_patients-1`` one at a time (constant memory)."""
    plan = _plan(targets or CalibrationTargets())
    for i in range(start, n_patients):
        yield generate_patient(plan, seed, i)


def generate_records(seed: int, n_patients: int, targets: Optional[CalibrationTargets] = None):
    return list(iter_patients(seed, n_patients, targets))


ADVERSARIAL_DEFAULT = replace(CalibrationTargets(), adversarial="ICD")
