"""AUROC family, the regression analog score and significance testing."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats


@dataclass
class AurocResult:
    value: float  # NaN when degenerate
    degenerate: bool
    n_pos: int = 0
    n_neg: int = 0


def auroc(scores, labels) -> AurocResult:
    """Mann-Whitney AUROC with midranks: P(s+ > s-) + 0.5 P(s+ == s-).

    Single-class input is flagged degenerate and carries NaN.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel().astype(bool)
    if scores.shape != labels.shape:
        raise ValueError(f"scores {scores.shape} and labels {labels.shape} differ in length")
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return AurocResult(float("nan"), True, n_pos, n_neg)
    ranks = stats.rankdata(scores, method="average")
    u = ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0
    return AurocResult(float(u / (n_pos * n_neg)), False, n_pos, n_neg)


@dataclass
class MacroResult:
    value: float
    per_label: list
    degenerate: list = field(default_factory=list)  # indices excluded from the mean

    @property
    def is_degenerate(self):
        return len(self.degenerate) == len(self.per_label)


def auroc_macro(scores, labels) -> MacroResult:
    """Mean per-label AUROC over columns, skipping single-class columns.

    ``scores`` [n, k]. ``labels`` is either a [n, k] indicator matrix
    (multilabel) or a length-n vector of class indices (one-vs-rest).
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim == 1:
        scores = scores[:, None]
    labels = np.asarray(labels)
    if labels.ndim == 1 and scores.shape[1] > 1:
        labels = labels[:, None] == np.arange(scores.shape[1])[None, :]
    elif labels.ndim == 1:
        labels = labels[:, None]
    per = [auroc(scores[:, j], labels[:, j]) for j in range(scores.shape[1])]
    vals = [r.value for r in per]
    bad = [j for j, r in enumerate(per) if r.degenerate]
    good = [v for r, v in zip(per, vals) if not r.degenerate]
    value = float(np.mean(good)) if good else float("nan")
    return MacroResult(value, vals, bad)


def r_squared(pred, target, mask=None):
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if mask is None:
        mask = np.ones_like(target)
    sel = np.asarray(mask) > 0
    if not sel.any():
        return float("nan")
    y, p = target[sel], pred[sel]
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum((y - p) ** 2))
    if ss_tot == 0:
        return 1.0 if ss_res == 0 else float("-inf")
    return 1.0 - ss_res / ss_tot


def regression_analog(r2):
    """2 ** (R^2 - 1): 1 at a perfect fit, 0.5 at the mean predictor, -> 0 as R^2 -> -inf."""
    r2 = min(float(r2), 1.0)
    if r2 == float("-inf"):
        return 0.0
    return float(2.0 ** (r2 - 1.0))


@dataclass
class TTestResult:
    p_value: float
    statistic: float
    significant: bool


def t_test(a, b, welch=True, alpha=0.05) -> TTestResult:
    """Two-sided two-sample t-test (Welch by default)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise ValueError("t-test needs at least two values per sample")
    if a.var() == 0 and b.var() == 0:
        if a.mean() == b.mean():
            return TTestResult(1.0, 0.0, False)
        return TTestResult(0.0, float(np.sign(a.mean() - b.mean()) * np.inf), True)
    res = stats.ttest_ind(a, b, equal_var=not welch)
    p = float(res.pvalue)
    return TTestResult(p, float(res.statistic), p < alpha)
