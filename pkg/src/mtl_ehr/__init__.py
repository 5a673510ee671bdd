"""Multi-task learning on clinical physiological time series.

Subpackages: ``autodiff`` (tensors and gradients), ``models`` (encoders and
decoders), ``tasks`` (the task battery and label derivation), ``data``
(synthetic cohorts, persistence, splits), ``training`` (regimes and Adam),
``metrics`` (AUROC, analyses, reports), ``hypersearch`` (random and TPE
search) and ``cli``.
"""

__version__ = "0.1.0"
