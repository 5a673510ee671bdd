import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from mtl_ehr.errors import DataError
from mtl_ehr.metrics import (
    GAP, ResultStore, auroc, auroc_macro, discrepancy_table, negative_transfer_matrix, r_squared,
    regression_analog, sex_discrepancy, t_test,
)
from mtl_ehr.metrics import reports
from mtl_ehr.tasks.specs import REPORTED_CATEGORIES

from _oracles import pairwise_auroc


def random_instance(rng):
    n = int(rng.integers(2, 201))
    levels = int(rng.integers(2, 12))
    scores = rng.integers(0, levels, size=n) / levels  # plenty of ties
    if rng.random() < 0.5:
        scores = scores + rng.normal(scale=1e-3, size=n) * (rng.random(n) < 0.5)
    labels = rng.random(n) < rng.uniform(0.1, 0.9)
    labels[0], labels[1] = True, False
    return scores, labels


# -- AUROC -----------------------------------------------------------------------------

def test_auroc_matches_pairwise_oracle_on_1000_instances():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        s, y = random_instance(rng)
        assert auroc(s, y).value == pairwise_auroc(s, y)


def test_auroc_separated_and_constant():
    assert auroc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]).value == 1.0
    assert auroc([0.3] * 6, [0, 1, 0, 1, 1, 0]).value == 0.5


def test_auroc_single_class_is_degenerate():
    r = auroc([0.1, 0.4], [1, 1])
    assert r.degenerate and math.isnan(r.value)


@settings(max_examples=60)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 10), st.floats(-5, 5))
def test_auroc_invariant_under_increasing_maps(seed, a, b):
    rng = np.random.default_rng(seed)
    s, y = random_instance(rng)
    base = auroc(s, y).value
    assert auroc(a * s + b, y).value == base
    assert auroc(np.exp(s), y).value == base


def test_macro_examples():
    scores = np.array([[0.9, 0.4], [0.8, 0.4], [0.1, 0.4], [0.2, 0.4]])
    labels = np.array([[1, 1], [1, 0], [0, 1], [0, 0]])
    per = [auroc(scores[:, j], labels[:, j]).value for j in range(2)]
    assert per == [1.0, 0.5]
    assert auroc_macro(scores, labels).value == 0.75
    three = np.column_stack([labels, np.ones(4)])
    res = auroc_macro(np.column_stack([scores, scores[:, 0]]), three)
    assert res.degenerate == [2] and res.value == 0.75


def test_all_degenerate_macro_is_flagged():
    res = auroc_macro(np.ones((3, 2)), np.ones((3, 2)))
    assert res.is_degenerate and math.isnan(res.value)


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1), st.integers(1, 5))
def test_macro_of_identical_columns_equals_single(seed, k):
    s, y = random_instance(np.random.default_rng(seed))
    res = auroc_macro(np.tile(s[:, None], k), np.tile(y[:, None], k))
    assert res.value == pytest.approx(auroc(s, y).value, abs=1e-15)


def test_multiclass_is_one_vs_rest(rng):
    scores = rng.random((60, 4))
    labels = rng.integers(0, 4, size=60)
    want = np.mean([pairwise_auroc(scores[:, c], labels == c) for c in range(4)])
    assert auroc_macro(scores, labels).value == pytest.approx(want, abs=1e-15)


def test_regression_analog_points():
    assert regression_analog(1.0) == 1.0
    assert regression_analog(0.0) == 0.5
    assert regression_analog(-1.0) == 0.25
    assert regression_analog(float("-inf")) == 0.0


def test_r_squared_mask_and_mean_predictor(rng):
    y = rng.normal(size=50)
    assert r_squared(np.full(50, y.mean()), y) == pytest.approx(0.0, abs=1e-12)
    mask = np.zeros(50)
    mask[:10] = 1
    pred = y.copy()
    pred[10:] += 100
    assert r_squared(pred, y, mask) == 1.0


# -- t-test -----------------------------------------------------------------------------------

def test_t_test_identical_and_separated():
    r = t_test([0.5] * 5, [0.5] * 5)
    assert r.p_value == 1.0 and not r.significant
    jitter = np.arange(5) * 1e-9
    assert t_test(np.ones(5) + jitter, 2 * np.ones(5) + jitter).significant


def test_t_test_needs_two_values():
    with pytest.raises(ValueError):
        t_test([1.0], [1.0, 2.0])


def _student_t_cdf(t):
    """Closed-form Student t CDF with four degrees of freedom."""
    x = t / math.sqrt(4 + t * t)
    return 0.5 + 0.75 * x * (1 - x * x / 3)


def test_t_test_df4_cdf_oracle():
    # Student t with equal sizes n=3 has df=4: p = 2 * (1 - F4(|t|))
    rng = np.random.default_rng(3)
    for _ in range(50):
        a, b = rng.normal(size=3), rng.normal(0.5, size=3)
        r = t_test(a, b, welch=False)
        assert r.p_value == pytest.approx(2 * (1 - _student_t_cdf(abs(r.statistic))), abs=1e-3)
    # published critical value: t(0.975, df=4) = 2.776
    assert _student_t_cdf(2.776) == pytest.approx(0.975, abs=1e-3)


def test_welch_matches_scipy(rng):
    a, b = rng.normal(size=5), rng.normal(1, 3, size=5)
    assert t_test(a, b).p_value == pytest.approx(stats.ttest_ind(a, b, equal_var=False).pvalue)


# -- negative transfer and sex gaps -------------------------------------------------------------

def _row(regime, task, category, seed, value, subgroup="all", fraction=1.0, subsample="none"):
    return {"regime": regime, "task": task, "category": category, "seed": seed, "value": value,
            "subgroup": subgroup, "fraction": fraction, "subsample": subsample, "config_hash": "h"}


def _nt_rows(rng, cats=REPORTED_CATEGORIES, seeds=range(5)):
    rows = []
    for s in seeds:
        for r in cats:
            rows.append(_row("MT", None, r, s, float(rng.uniform(0.6, 0.9))))
            for t in cats:
                if t != r:
                    rows.append(_row("PRETRAIN-OMIT", t, r, s, float(rng.uniform(0.6, 0.9))))
    return rows


def test_negative_transfer_sign_convention():
    rows = [_row("MT", None, "LOS", 0, 0.78), _row("PRETRAIN-OMIT", "MOR", "LOS", 0, 0.80)]
    nt = negative_transfer_matrix(rows, ("MOR", "LOS"))
    assert nt.delta[("MOR", "LOS")] == pytest.approx(0.02)
    assert ("MOR", "MOR") not in nt.delta
    assert nt.delta[("LOS", "MOR")] is GAP


def test_negative_transfer_views_and_recomputation(rng):
    rows = _nt_rows(rng)
    nt = negative_transfer_matrix(rows)
    right = nt.right_view()
    assert len(nt.delta) == 90
    for key, d in nt.delta.items():
        assert right[key] == -d
        t, r = key
        mt = {x["seed"]: x["value"] for x in rows if x["regime"] == "MT" and x["category"] == r}
        om = {x["seed"]: x["value"] for x in rows if x["regime"] == "PRETRAIN-OMIT"
              and x["task"] == t and x["category"] == r}
        assert abs(d - np.mean([om[s] - mt[s] for s in range(5)])) < 1e-12


def test_missing_runs_are_gaps(rng):
    rows = [r for r in _nt_rows(rng) if not (r["regime"] == "PRETRAIN-OMIT" and r["task"] == "ICD")]
    nt = negative_transfer_matrix(rows)
    assert all(nt.delta[("ICD", r)] is GAP for r in REPORTED_CATEGORIES if r != "ICD")
    assert nt.mean_over_reported("ICD") is GAP


def test_sex_discrepancy_swap_negates(rng):
    scores = rng.random(300)
    labels = rng.random(300) < 0.3
    sex = np.where(rng.random(300) < 0.5, "M", "F")
    a = sex_discrepancy(scores, labels, sex)
    b = sex_discrepancy(scores, labels, np.where(sex == "M", "F", "M"))
    assert a.value == -b.value


def test_sex_discrepancy_exchangeable_data_near_zero():
    rng = np.random.default_rng(9)
    n = 20000
    x = rng.normal(size=n)
    labels = rng.random(n) < 1 / (1 + np.exp(-2 * x))
    sex = np.where(rng.random(n) < 0.5, "M", "F")
    assert abs(sex_discrepancy(x, labels, sex).value) < 2.0


def test_degenerate_subgroup_is_flagged(rng):
    sex = np.array(["M"] * 10 + ["F"] * 10)
    labels = np.array([0, 1] * 5 + [1] * 10)
    d = sex_discrepancy(rng.random(20), labels, sex)
    assert d.degenerate and math.isnan(d.value)


def test_discrepancy_table_from_rows():
    rows = []
    for s, (m, f) in enumerate([(0.8, 0.7), (0.9, 0.7)]):
        rows += [_row("ST", "MOR", "MOR", s, m, "M"), _row("ST", "MOR", "MOR", s, f, "F")]
    table = discrepancy_table(rows, ("ST", "MT"), ("MOR",))
    mean, std, n = table[("MOR", "ST")]
    assert n == 2 and mean == pytest.approx(15.0) and std == pytest.approx(5.0)
    assert table[("MOR", "MT")] is GAP


# -- store and reports -------------------------------------------------------------------

def test_store_append_read_and_torn_tail(tmp_path):
    store = ResultStore(tmp_path / "r.jsonl")
    assert store.read() == []
    store.append([{"cell": "a", "value": 1.0}, {"cell": "b", "value": None}])
    with open(tmp_path / "r.jsonl", "a") as fh:
        fh.write('{"cell": "c", "val')
    assert [r["cell"] for r in store.read()] == ["a", "b"]
    assert store.completed_cells() == {"a", "b"}


def test_store_rejects_corruption_mid_file(tmp_path):
    path = tmp_path / "r.jsonl"
    path.write_text('{"cell": "a"}\nnot json\n{"cell": "b"}\n')
    with pytest.raises(DataError):
        ResultStore(path).read()


def _table_rows(rng):
    rows = []
    for s in range(5):
        for cat in REPORTED_CATEGORIES:
            for reg in ("ST", "MT", "FTD", "FTF"):
                task = None if reg == "MT" else cat
                rows.append(_row(reg, task, cat, s, float(rng.uniform(0.6, 0.95))))
            for reg in ("ST", "FTD", "FTF"):
                rows.append(_row(reg, cat, cat, s, float(rng.uniform(0.5, 0.9)), fraction=0.01,
                                 subsample="few-shot"))
                for g in ("M", "F"):
                    rows.append(_row(reg, cat, cat, s, float(rng.uniform(0.5, 0.9)), g))
    return rows


def _read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# config_hash=") and "version=" in lines[0] and "seed=7" in lines[0]
    return [line.split(",") for line in lines[1:]]


def test_table2_layout_and_format(tmp_path, rng):
    rows = _table_rows(rng)
    path = tmp_path / "t.csv"
    reports.table2(rows, path, seed=7)
    table = _read_csv(path)
    assert table[0] == ["category", "ST 100%", "MT 100%", "FTD 100%", "FTF 100%", "ST 1.0%",
                        "FTD 1.0%", "FTF 1.0%", "best_full", "best_fewshot"]
    assert [r[0] for r in table[1:]] == list(REPORTED_CATEGORIES)
    for cell in table[1][1:8]:
        mean = cell.split(" ± ")[0]
        assert len(mean.split(".")[1]) == 1


def test_identical_regimes_get_no_stars(tmp_path):
    rows = []
    for s, v in enumerate([0.7, 0.72, 0.74, 0.71, 0.73]):
        rows += [_row("ST", "MOR", "MOR", s, v), _row("FTF", "MOR", "MOR", s, v)]
    reports.table2(rows, tmp_path / "t.csv", seed=7, categories=("MOR",))
    line = _read_csv(tmp_path / "t.csv")[1]
    assert "*" not in ",".join(line)


def test_single_seed_significance_is_na(tmp_path):
    rows = [_row("ST", "MOR", "MOR", 0, 0.7), _row("FTF", "MOR", "MOR", 0, 0.9)]
    reports.table2(rows, tmp_path / "t.csv", seed=7, categories=("MOR",))
    assert _read_csv(tmp_path / "t.csv")[1][4].endswith("n/a")


def test_negative_transfer_csv_has_90_cells(tmp_path, rng):
    path = tmp_path / "nt.csv"
    reports.negative_transfer_csv(_nt_rows(rng), path, seed=7)
    assert len(_read_csv(path)) == 91


def test_reports_are_byte_identical(tmp_path, rng):
    rows = _table_rows(rng)
    for d in ("a", "b"):
        out = tmp_path / d
        out.mkdir()
        reports.table2(rows, out / "t.csv", seed=7)
        reports.discrepancy_csv(rows, out / "d.csv", seed=7)
        reports.fewshot_figures(rows, out, seed=7)
    for name in ("t.csv", "d.csv", "fewshot_MOR.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_fewshot_svg_has_one_polyline_per_regime(tmp_path, rng):
    paths = reports.fewshot_figures(_table_rows(rng), tmp_path, seed=7)
    svg = (tmp_path / "fewshot_MOR.svg").read_text()
    assert len(paths) == len(REPORTED_CATEGORIES)
    assert svg.count("<polyline") == 3 and "config_hash=" in svg


def test_empty_store_report_is_data_error(tmp_path):
    with pytest.raises(DataError):
        reports.table2([], tmp_path / "t.csv")
