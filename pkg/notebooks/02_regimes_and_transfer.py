# %% [markdown]
# # Training regimes on a small cohort
#
# Pretrain an encoder on every task but mortality, then compare a
# mortality model trained from scratch (ST) with one fine-tuned from the
# pretrained encoder (FTF) as the training set shrinks. The test split here
# has only 200 patients, so single-seed numbers at small fractions are noisy.

# %%
import tempfile

from mtl_ehr.data import generate_cohort
from mtl_ehr.data.dataset import SubsampleSpec
from mtl_ehr.metrics import negative_transfer_matrix
from mtl_ehr.models import EncoderConfig
from mtl_ehr.training import EvalCache, Regime, TrainConfig, run_regime

ds = generate_cohort(seed=1, n_patients=2000)
ckpt = tempfile.mkdtemp()
cats = ("MOR", "CMO", "LOS")
enc = EncoderConfig(kind="gru", embed_dim=16, hidden_dim=32, num_layers=1, pooling="last",
                    dropout=0.1, input_window_hours=24)
train = TrainConfig(epochs=5, batch_size=8, learning_rate=1e-3)
cache = EvalCache(ds)

pre = run_regime(Regime("PRETRAIN-OMIT", "MOR"), ds, enc, train, cats, out_dir=ckpt,
                 cache=cache)
print("pretrained on", pre.trained, "checkpoint", pre.checkpoint)

# %%
for fraction in (0.02, 0.1, 1.0):
    spec = SubsampleSpec("few-shot", fraction, seed=0)
    st = run_regime(Regime("ST", "MOR"), ds, enc, train, cats, spec, cache=cache)
    ftf = run_regime(Regime("FTF", "MOR", pre.checkpoint), ds, enc, train, cats, spec, cache=cache)
    print(f"{fraction:>5.0%}  ST {st.categories['MOR']['all']:.3f}  FTF {ftf.categories['MOR']['all']:.3f}")

# %% [markdown]
# ## Negative transfer
#
# Delta(t, r) compares performance on r without task t in the mix against
# the full multi-task model. Positive means leaving t out helped r.

# %%
rows = []
for seed in range(2):
    rows += run_regime(Regime("MT"), ds, enc, train, cats, cache=cache, seed=seed).rows()
    for t in cats:
        rows += run_regime(Regime("PRETRAIN-OMIT", t), ds, enc, train, cats, out_dir=ckpt,
                           cache=cache, seed=seed).rows()
nt = negative_transfer_matrix(rows, cats)
for (t, r), d in sorted(nt.delta.items()):
    print(f"omit {t:<4s} -> {r:<4s} {d:+.4f}")
