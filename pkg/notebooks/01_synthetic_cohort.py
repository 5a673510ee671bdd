# %% [markdown]
# # A synthetic ICU cohort
#
# Generate a small cohort, look at one patient, and compare the cohort's
# summary statistics with the reference values the generator is calibrated to.

# %%
from mtl_ehr.data import generate_cohort
from mtl_ehr.data.calibration import CalibrationAccumulator, reference_values
from mtl_ehr.schema import CHANNEL_NAMES

ds = generate_cohort(seed=0, n_patients=2000)
print(len(ds), "patients", ds.split_sizes())

# %% [markdown]
# Each record holds standardised hourly channel values with a measurement
# mask, three binary treatment indicators, and the outcomes the task labels
# derive from.

# %%
rec = ds.split("train")[0]
print("stay hours:", rec.values.shape[0], "sex:", rec.sex, "died at hour:", rec.death_hour)
rates = rec.measured.mean(axis=0)
for name, rate in sorted(zip(CHANNEL_NAMES, rates), key=lambda p: -p[1])[:5]:
    print(f"  {name:<28s} measured {rate:.0%} of hours")

# %% [markdown]
# ## Calibration
#
# Majority-class rates and measurement rates, streamed over the cohort.

# %%
acc = CalibrationAccumulator()
for r in ds.records:
    acc.add(r)
summary = acc.summary()
ref = reference_values()
for key in ("mca:MOR-24", "mca:CMO-24", "mca:REA", "mca:LOS", "measured:Heart Rate", "icd:Circulatory"):
    print(f"{key:<22s} target {ref[key]:.3f}  got {summary[key]:.3f}")
