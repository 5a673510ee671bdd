"""Aggregations over stored results: negative transfer, sex gaps, few-shot curves.

Rows are the dicts written by ``RegimeResult.rows``: one per regime, omitted
or trained task, reported category, seed, fraction and subgroup.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from ..tasks.specs import REPORTED_CATEGORIES
from .scores import auroc_macro, t_test

GAP = None  # marker for a cell whose runs are missing


def _by_seed(rows, **match):
    """``{seed: value}`` of matching rows; imbalanced runs only when asked for."""
    out = {}
    for r in rows:
        if "subsample" not in match and r.get("subsample") == "imbalanced":
            continue
        if all(r.get(k) == v for k, v in match.items()) and r.get("value") is not None:
            out[r["seed"]] = r["value"]
    return out


@dataclass
class NegativeTransfer:
    """``delta[(t, r)] = mean over seeds of M_not_t(r) - M(r)``; ``GAP`` where runs are missing."""

    categories: tuple
    delta: dict
    per_seed: dict
    significant: dict = field(default_factory=dict)

    def right_view(self):
        """The transposed reading ``M(r) - M_not_t(r)``."""
        return {k: (GAP if v is GAP else -v) for k, v in self.delta.items()}

    def mean_over_reported(self, t):
        vals = [v for (a, _), v in self.delta.items() if a == t and v is not GAP]
        return float(np.mean(vals)) if vals else GAP


def negative_transfer_matrix(rows, categories=REPORTED_CATEGORIES, subgroup="all", fraction=1.0):
    """Deltas for every omitted ``t`` and reported ``r != t``, matched by seed."""
    base = {r: _by_seed(rows, regime="MT", category=r, subgroup=subgroup, fraction=fraction)
            for r in categories}
    delta, per_seed, sig = {}, {}, {}
    for t in categories:
        for r in categories:
            if t == r:
                continue
            omit = _by_seed(rows, regime="PRETRAIN-OMIT", task=t, category=r,
                            subgroup=subgroup, fraction=fraction)
            seeds = sorted(set(omit) & set(base[r]))
            if not seeds:
                delta[(t, r)] = GAP
                per_seed[(t, r)] = {}
                sig[(t, r)] = None
                continue
            d = {s: omit[s] - base[r][s] for s in seeds}
            per_seed[(t, r)] = d
            delta[(t, r)] = float(np.mean(list(d.values())))
            if len(seeds) >= 2:
                sig[(t, r)] = t_test([omit[s] for s in seeds], [base[r][s] for s in seeds]).significant
            else:
                sig[(t, r)] = None
    return NegativeTransfer(tuple(categories), delta, per_seed, sig)


@dataclass
class Discrepancy:
    value: float  # (male - female) AUROC x 100, NaN when flagged
    degenerate: bool
    male: float
    female: float


def sex_discrepancy(scores, labels, sex):
    """Male minus female macro AUROC on the same predictions, in AUROC x 100."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    sex = np.asarray(sex)
    m = auroc_macro(scores[sex == "M"], labels[sex == "M"])
    f = auroc_macro(scores[sex == "F"], labels[sex == "F"])
    bad = m.is_degenerate or f.is_degenerate
    value = float("nan") if bad else 100.0 * (m.value - f.value)
    return Discrepancy(value, bad, m.value, f.value)


def discrepancy_table(rows, regimes=("ST", "MT", "FTD", "FTF"), categories=REPORTED_CATEGORIES,
                      fraction=1.0, subsample=None):
    """``{(category, regime): (mean, std, n)}`` of (M - F) x 100 over seeds.

    With ``subsample="imbalanced"`` the rows are the imbalanced fine-tuning
    runs and ``fraction`` is the share of female patients removed.
    """
    out = {}
    for cat in categories:
        for reg in regimes:
            match = dict(regime=reg, category=cat, fraction=fraction)
            if subsample is not None:
                match["subsample"] = subsample
            if reg != "MT":
                match["task"] = cat
            male = _by_seed(rows, subgroup="M", **match)
            female = _by_seed(rows, subgroup="F", **match)
            seeds = sorted(set(male) & set(female))
            if not seeds:
                out[(cat, reg)] = GAP
                continue
            d = np.array([100.0 * (male[s] - female[s]) for s in seeds])
            out[(cat, reg)] = (float(d.mean()), float(d.std()), len(seeds))
    return out


def regime_values(rows, regime, category, fraction, subgroup="all"):
    match = dict(regime=regime, category=category, fraction=fraction, subgroup=subgroup)
    if regime != "MT":
        match["task"] = category
    got = _by_seed(rows, **match)
    return [got[s] for s in sorted(got)]


def fewshot_curves(rows, regimes=("ST", "FTD", "FTF"), categories=REPORTED_CATEGORIES):
    """``{category: {regime: [(fraction, mean, std, n), ...]}}`` sorted by fraction."""
    fracs = defaultdict(set)
    for r in rows:
        if r.get("subsample") == "few-shot" or r.get("fraction") == 1.0:
            fracs[(r["regime"], r["category"])].add(r["fraction"])
    out = {}
    for cat in categories:
        for reg in regimes:
            pts = []
            for f in sorted(fracs.get((reg, cat), ())):
                vals = regime_values(rows, reg, cat, f)
                if vals:
                    pts.append((f, float(np.mean(vals)), float(np.std(vals)), len(vals)))
            if pts:
                out.setdefault(cat, {})[reg] = pts
    return out


def mean_std(values):
    if not values:
        return GAP
    return float(np.mean(values)), float(np.std(values)), len(values)


def is_gap(x):
    return x is GAP or (isinstance(x, float) and math.isnan(x))
