"""CSV tables and SVG few-shot curves built from a results store.

Every file starts with a provenance comment line carrying the store's
config hash, the package version and the master seed. Output depends only
on the rows, so re-emitting from the same store is byte-identical.
"""
from __future__ import annotations

import csv
import io
import math
import os

from .. import __version__
from ..autodiff.checkpoint import atomic_write
from ..errors import DataError
from ..hashing import config_hash
from ..tasks.specs import REPORTED_CATEGORIES
from .analysis import (
    GAP, discrepancy_table, fewshot_curves, negative_transfer_matrix, regime_values,
)
from .scores import t_test

FULL_COLUMNS = ("ST", "MT", "FTD", "FTF")
FEWSHOT_COLUMNS = ("ST", "FTD", "FTF")
FEWSHOT_FRACTION = 0.01


def store_hash(rows):
    return config_hash(sorted({r.get("config_hash", "") for r in rows}))


def provenance(rows, seed):
    return f"# config_hash={store_hash(rows)} version={__version__} seed={seed}\n"


def fmt(value):
    """AUROC scaled by 100, one decimal."""
    return f"{100.0 * value:.1f}"


def _cell(vals, ref):
    """``mean ± std`` with a star when significantly different from ``ref``."""
    if not vals:
        return ""
    mean = sum(vals) / len(vals)
    std = math.sqrt(sum((v - mean) ** 2 for v in vals) / len(vals))
    text = f"{fmt(mean)} ± {fmt(std)}"
    if ref is None:
        return text
    if len(vals) < 2 or len(ref) < 2:
        return text + " n/a"
    return text + ("*" if t_test(vals, ref).significant else "")


def _write_csv(path, rows, seed, header, body):
    buf = io.StringIO()
    buf.write(provenance(rows, seed))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(body)
    atomic_write(path, buf.getvalue().encode())
    return path


def _require(rows, what):
    if not rows:
        raise DataError(f"the results store is empty; nothing to put in the {what}")


def table2(rows, path, seed=0, categories=REPORTED_CATEGORIES, fewshot=FEWSHOT_FRACTION):
    """Full-data ST/MT/FTD/FTF and few-shot ST/FTD/FTF per category.

    Stars mark a significant Welch t-test against ST at the same fraction;
    the ``best_*`` columns name the top mean in each row.
    """
    _require(rows, "main table")
    header = ["category"] + [f"{c} 100%" for c in FULL_COLUMNS] + \
             [f"{c} {fmt(fewshot)}%" for c in FEWSHOT_COLUMNS] + ["best_full", "best_fewshot"]
    body = []
    for cat in categories:
        line, bests = [cat], []
        for cols, frac in ((FULL_COLUMNS, 1.0), (FEWSHOT_COLUMNS, fewshot)):
            ref = regime_values(rows, "ST", cat, frac)
            best, best_name = -math.inf, ""
            for c in cols:
                vals = regime_values(rows, c, cat, frac)
                line.append(_cell(vals, None if c == "ST" else ref))
                if vals and sum(vals) / len(vals) > best:
                    best, best_name = sum(vals) / len(vals), c
            bests.append(best_name)
        body.append(line + bests)
    return _write_csv(path, rows, seed, header, body)


def negative_transfer_csv(rows, path, seed=0, categories=REPORTED_CATEGORIES):
    """One line per off-diagonal (omitted, reported) pair, both sign views, x100."""
    _require(rows, "negative-transfer table")
    nt = negative_transfer_matrix(rows, categories)
    right = nt.right_view()
    body = []
    for t in categories:
        for r in categories:
            if t == r:
                continue
            d = nt.delta[(t, r)]
            sig = nt.significant[(t, r)]
            body.append([t, r,
                         "gap" if d is GAP else fmt(d),
                         "gap" if d is GAP else fmt(right[(t, r)]),
                         len(nt.per_seed[(t, r)]),
                         "n/a" if sig is None else ("*" if sig else "")])
    header = ["omitted", "reported", "omit_minus_full", "full_minus_omit", "seeds", "significant"]
    return _write_csv(path, rows, seed, header, body)


def discrepancy_csv(rows, path, seed=0, categories=REPORTED_CATEGORIES, regimes=None,
                    subsample=None, fraction=1.0):
    """Male minus female AUROC x 100, mean ± std over seeds.

    By default the imbalanced runs with every female patient removed are
    used when the store has any, and the full-data runs otherwise.
    """
    _require(rows, "sex-discrepancy table")
    if subsample is None and any(r.get("subsample") == "imbalanced" for r in rows):
        subsample = "imbalanced"
    if regimes is None:
        regimes = FEWSHOT_COLUMNS if subsample == "imbalanced" else FULL_COLUMNS
    table = discrepancy_table(rows, regimes, categories, fraction, subsample)
    body = []
    for cat in categories:
        line = [cat]
        for reg in regimes:
            v = table[(cat, reg)]
            line.append("" if v is GAP else f"{v[0]:.1f} ± {v[1]:.1f}")
        body.append(line)
    return _write_csv(path, rows, seed, ["category"] + list(regimes), body)


_STYLES = {"ST": ("#1f77b4", ""), "FTD": ("#2ca02c", "6,3"), "FTF": ("#d62728", "2,2"),
           "MT": ("#7f7f7f", "8,2,2,2")}


def fewshot_svg(curves, category, seed_line):
    """AUROC against log10 fraction, one polyline per regime."""
    W, H, L, R, T, B = 480, 320, 60, 90, 30, 45
    series = curves[category]
    xs = [math.log10(p[0]) for pts in series.values() for p in pts]
    ys = [p[1] for pts in series.values() for p in pts]
    x0, x1 = min(xs), max(xs)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    y0 = math.floor(min(ys) * 20) / 20
    y1 = max(math.ceil(max(ys) * 20) / 20, y0 + 0.05)

    def px(x):
        return L + (math.log10(x) - x0) / (x1 - x0) * (W - L - R)

    def py(y):
        return H - B - (y - y0) / (y1 - y0) * (H - T - B)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
           f"<!-- {seed_line.strip()} -->",
           f'<text x="{W / 2:.1f}" y="18" text-anchor="middle" font-size="14">{category}</text>',
           f'<line x1="{L}" y1="{H - B}" x2="{W - R}" y2="{H - B}" stroke="black"/>',
           f'<line x1="{L}" y1="{T}" x2="{L}" y2="{H - B}" stroke="black"/>']
    for k in range(math.ceil(x0), math.floor(x1) + 1):
        x = L + (k - x0) / (x1 - x0) * (W - L - R)
        out.append(f'<line x1="{x:.1f}" y1="{H - B}" x2="{x:.1f}" y2="{H - B + 4}" stroke="black"/>')
        out.append(f'<text x="{x:.1f}" y="{H - B + 16}" text-anchor="middle" font-size="10">{100 * 10 ** k:g}%</text>')
    steps = max(1, round((y1 - y0) / 0.05))
    for i in range(steps + 1):
        y = y0 + i * (y1 - y0) / steps
        out.append(f'<text x="{L - 6}" y="{py(y) + 3:.1f}" text-anchor="end" font-size="10">{fmt(y)}</text>')
    out.append(f'<text x="{(L + W - R) / 2:.1f}" y="{H - 8}" text-anchor="middle" font-size="11">training fraction (log scale)</text>')
    out.append(f'<text x="14" y="{(T + H - B) / 2:.1f}" font-size="11" transform="rotate(-90 14 {(T + H - B) / 2:.1f})" text-anchor="middle">AUROC x 100</text>')
    for i, (reg, pts) in enumerate(sorted(series.items())):
        colour, dash = _STYLES.get(reg, ("#000000", ""))
        coords = " ".join(f"{px(f):.1f},{py(m):.1f}" for f, m, _, _ in pts)
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        out.append(f'<polyline points="{coords}" fill="none" stroke="{colour}" stroke-width="2"{extra}/>')
        ly = T + 14 * i + 6
        out.append(f'<line x1="{W - R + 8}" y1="{ly}" x2="{W - R + 30}" y2="{ly}" stroke="{colour}" stroke-width="2"{extra}/>')
        out.append(f'<text x="{W - R + 34}" y="{ly + 4}" font-size="11">{reg}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def fewshot_figures(rows, directory, seed=0, categories=REPORTED_CATEGORIES):
    _require(rows, "few-shot curves")
    curves = fewshot_curves(rows, categories=categories)
    if not curves:
        raise DataError("no few-shot results in the store")
    os.makedirs(directory, exist_ok=True)
    paths = []
    line = provenance(rows, seed)
    for cat in categories:
        if cat not in curves:
            continue
        path = os.path.join(directory, f"fewshot_{cat}.svg")
        atomic_write(path, fewshot_svg(curves, cat, line).encode())
        paths.append(path)
    return paths
