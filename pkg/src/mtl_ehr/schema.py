"""Fixed vocabularies: input channels, treatments, and the label spaces of the
discharge, ICD and acuity tasks, each with its reference prevalence.

Prevalences are percentages as published for the source cohort; the
synthetic generator is calibrated against them and the task manifest ships
the class order so that ingested data binds to identical indices.
"""

SCHEMA_VERSION = 1

# (name, % of patient-hours measured)
CHANNELS = (
    ("Heart Rate", 91.6),
    ("Respiratory Rate", 90.2),
    ("Diastolic Blood Pressure", 88.8),
    ("Systolic Blood Pressure", 88.8),
    ("Mean Blood Pressure", 88.3),
    ("Oxygen Saturation", 87.6),
    ("Temperature", 29.8),
    ("Glucose", 23.2),
    ("Central Venous Pressure", 20.3),
    ("Glascow Coma Scale Total", 17.7),
    ("Hematocrit", 11.2),
    ("Potassium", 10.4),
    ("Sodium", 9.9),
    ("Pulmonary Artery Pressure Systolic", 9.4),
    ("Chloride", 9.4),
    ("Ph", 9.2),
    ("Hemoglobin", 9.0),
    ("Creatinine", 8.8),
    ("Blood Urea Nitrogen", 8.7),
    ("Bicarbonate", 8.6),
    ("Magnesium", 8.3),
    ("Anion Gap", 8.3),
    ("Partial Pressure Of Carbon Dioxide", 8.3),
    ("Co2 (Etco2, Pco2, Etc.)", 8.3),
    ("Platelets", 8.2),
    ("Positive End-Expiratory Pressure Set", 8.0),
    ("White Blood Cell Count", 7.9),
    ("Calcium", 7.1),
    ("Fraction Inspired Oxygen Set", 7.0),
    ("Tidal Volume Observed", 6.8),
    ("Mean Corpuscular Hemoglobin Concentration", 6.2),
    ("Mean Corpuscular Volume", 6.2),
    ("Red Blood Cell Count", 6.2),
    ("Mean Corpuscular Hemoglobin", 6.2),
    ("Partial Thromboplastin Time", 6.0),
    ("Prothrombin Time Inr", 5.7),
    ("Prothrombin Time Pt", 5.7),
    ("Peak Inspiratory Pressure", 5.6),
    ("Phosphate", 5.5),
    ("Phosphorous", 5.4),
    ("Respiratory Rate Set", 4.9),
    ("Calcium Ionized", 4.9),
    ("Fraction Inspired Oxygen", 4.7),
    ("Tidal Volume Set", 4.6),
    ("Partial Pressure Of Oxygen", 4.3),
    ("Cardiac Index", 3.6),
    ("Co2", 3.5),
    ("Pulmonary Artery Pressure Mean", 3.5),
    ("Tidal Volume Spontaneous", 3.5),
    ("Plateau Pressure", 3.4),
    ("Systemic Vascular Resistance", 3.4),
    ("Potassium Serum", 3.2),
    ("Cardiac Output Thermodilution", 3.0),
    ("Lactate", 2.7),
    ("Weight", 2.5),
    ("Lactic Acid", 2.4),
)
CHANNEL_NAMES = tuple(name for name, _ in CHANNELS)
N_CHANNELS = len(CHANNELS)

TREATMENTS = ("ventilation", "vasopressors", "fluid-bolus")
N_TREATMENTS = len(TREATMENTS)

# model input per hour: imputed values, measured mask, treatment flags
N_FEATURES = 2 * N_CHANNELS + N_TREATMENTS

NO_DISCHARGE = "No Discharge"

# (discharge location, % @24h, % @48h)
DISCHARGE_LOCATIONS = (
    (NO_DISCHARGE, 73.0, 47.3),
    ("Home Health Care", 7.7, 15.1),
    ("Home", 7.3, 14.0),
    ("Skilled Nursing Facility (SNF)", 5.2, 10.3),
    ("Rehab/Distinct Part Hosp", 4.0, 7.9),
    ("Long Term Care Hospital", 1.1, 2.2),
    ("Discharge-Transfer Cancer/Children Hospital", 0.4, 0.9),
    ("Short Term Hospital", 0.3, 0.6),
    ("Discharge-Transfer To Psych Hospital", 0.3, 0.6),
    ("Hospice-Home", 0.3, 0.5),
    ("Left Against Medical Advice", 0.1, 0.2),
    ("Hospice-Medical Facility", 0.1, 0.2),
    ("Home With Home Iv Provider", 0.0, 0.1),
    ("Integrated Care Facility (ICF)", 0.0, 0.1),
    ("Other Facility", 0.0, 0.1),
    ("Discharge-Transfer To Federal Hc", 0.0, 0.0),
    ("Snf-Medicaid Only Certif", 0.0, 0.0),
)
DISCHARGE_NAMES = tuple(name for name, _, _ in DISCHARGE_LOCATIONS)
DESTINATIONS = DISCHARGE_NAMES[1:]

# (category, % of patients with >= 1 code)
ICD_CATEGORIES = (
    ("Circulatory", 72.2),
    ("Endocrine", 63.5),
    ("Respiratory", 53.0),
    ("Injury", 50.0),
    ("Digestive", 48.9),
    ("Ill Defined", 48.7),
    ("Genitourinary", 48.0),
    ("Blood", 47.9),
    ("Mental Health", 43.2),
    ("Infection", 41.8),
    ("Nervous", 40.8),
    ("Musculoskeletal", 33.5),
    ("Neoplasm", 29.8),
    ("Skin", 22.7),
    ("Congenital", 8.3),
    ("Pregnancy", 1.2),
    ("Unknown", 0.02),
    ("Perinatal", 0.00),
)
ICD_NAMES = tuple(name for name, _ in ICD_CATEGORIES)

IN_ICU_MORTALITY = "In ICU Mortality"
IN_HOSPITAL_MORTALITY = "In Hospital Mortality"

# (final acuity event, % of patients, discharge location it corresponds to)
ACUITY_LABELS = (
    ("Discharge to Home Health Care", 25.3, "Home Health Care"),
    ("Discharge to Home", 24.0, "Home"),
    ("Discharge to SNF", 17.2, "Skilled Nursing Facility (SNF)"),
    ("Discharge to Rehab/Distinct Part Hosp", 13.2, "Rehab/Distinct Part Hosp"),
    (IN_ICU_MORTALITY, 7.4, None),
    (IN_HOSPITAL_MORTALITY, 3.7, None),
    ("Discharge to Long Term Care Hospital", 3.6, "Long Term Care Hospital"),
    ("Discharge-Transfer Cancer/Children Hospital", 1.5, "Discharge-Transfer Cancer/Children Hospital"),
    ("Discharge to Short Term Hospital", 1.1, "Short Term Hospital"),
    ("Discharge-Transfer To Psych Hosp", 1.0, "Discharge-Transfer To Psych Hospital"),
    ("Discharge to Hospice-Home", 0.9, "Hospice-Home"),
    ("Left Against Medical Advice", 0.4, "Left Against Medical Advice"),
    ("Discharge to Hospice-Medical Facility", 0.3, "Hospice-Medical Facility"),
    ("Discharge to Home With Home Iv Provider", 0.2, "Home With Home Iv Provider"),
    ("Discharge to ICF", 0.1, "Integrated Care Facility (ICF)"),
    ("Discharge to Other Facility", 0.1, "Other Facility"),
    ("Discharge-Transfer To Federal Hc", 0.0, "Discharge-Transfer To Federal Hc"),
    ("Discharge to SNF-Medicaid Only Certified", 0.0, "Snf-Medicaid Only Certif"),
)
ACUITY_NAMES = tuple(name for name, _, _ in ACUITY_LABELS)
ACUITY_OF_DESTINATION = {dest: name for name, _, dest in ACUITY_LABELS if dest is not None}

# future treatment sequence vocabulary: bitmask over TREATMENTS, then EOS;
# START is an input-only token
N_TREATMENT_SETS = 2 ** N_TREATMENTS
EOS = N_TREATMENT_SETS
START = N_TREATMENT_SETS + 1
N_FTS_OUTPUTS = N_TREATMENT_SETS + 1
N_FTS_INPUTS = N_TREATMENT_SETS + 2


def treatment_set_name(token):
    if token == EOS:
        return "EOS"
    parts = [TREATMENTS[i] for i in range(N_TREATMENTS) if token >> i & 1]
    return "+".join(parts) if parts else "none"


FTS_NAMES = tuple(treatment_set_name(t) for t in range(N_FTS_OUTPUTS))
