import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from mtl_ehr.errors import ConfigError
from mtl_ehr.hypersearch import (
    Choice, IntUniform, LogNormal, LogUniform, SearchSpace, Trial, Uniform, run_sweep, sample,
    split_history, table_space, to_configs, to_params, tpe_suggest,
)
from mtl_ehr.metrics import ResultStore
from mtl_ehr.models import PRESETS
from mtl_ehr.training import TRAIN_PRESETS

ARCHS = ("gru", "transformer", "linear-concat")


def _draws(space, name, n=10000):
    return [sample(space, s)[name] for s in range(n)]


def test_learning_rate_median():
    lr = np.array(_draws(table_space("gru"), "learning_rate"))
    assert abs(np.median(lr) / math.exp(-7) - 1) < 0.10


def test_epochs_are_integers_in_range():
    ep = _draws(table_space("gru"), "epochs", 2000)
    assert all(isinstance(e, int) and 15 <= e <= 30 for e in ep)
    assert set(ep) == set(range(15, 31))


@pytest.mark.parametrize("name", ["pooling", "bidirectional"])
def test_choices_are_uniform(name):
    space = table_space("gru")
    vals = _draws(space, name)
    opts = space.dims[name].options
    counts = [vals.count(o) for o in opts]
    assert stats.chisquare(counts).pvalue > 0.01


def test_fc_growth_exponent_bounds():
    g = np.array(_draws(table_space("gru"), "fc_growth", 3000))
    assert g.min() >= math.exp(-1.1) and g.max() <= math.exp(1.1)


@pytest.mark.parametrize("arch", ARCHS)
def test_samples_validate_and_map_to_configs(arch):
    space = table_space(arch)
    for s in range(200):
        p = sample(space, s)
        assert space.contains(p)
        enc, train = to_configs(arch, p)
        assert enc.kind == arch
        if arch == "transformer":
            assert enc.embed_dim == p["num_heads"] * p["head_multiplier"]


def test_conditional_dimensions_follow_architecture():
    assert "hidden_dim" in table_space("gru").names
    assert "hidden_dim" not in table_space("transformer").names
    assert "num_heads" not in table_space("linear-concat").names


def test_sampling_is_deterministic():
    space = table_space("transformer")
    assert sample(space, 42) == sample(space, 42)
    assert sample(space, 42) != sample(space, 43)


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_are_expressible(name):
    enc = PRESETS[name]
    p = to_params(enc, TRAIN_PRESETS[name])
    space = table_space(enc.kind)
    outside = [k for k in space.names if not space.dims[k].contains(p[k])]
    # the GRU's batch of 254 is the one value beyond the searched range
    assert outside == (["batch_size"] if name == "gru-paper" else [])
    back, _ = to_configs(enc.kind, p, base_encoder=enc)
    assert back == enc


def test_unknown_parameter_is_config_error():
    with pytest.raises(ConfigError):
        to_configs("gru", {"bogus": 3})


# -- TPE --------------------------------------------------------------------------------------

def _trials(space, objective, n, seed=0):
    out = []
    for i in range(n):
        p = sample(space, seed * 1000 + i)
        out.append(Trial(i, space.arch, p, objective(p), "ok"))
    return out


PLANTED = SearchSpace("gru", {"x": Uniform(0.0, 1.0), "c": Choice(("a", "b", "c"))})


def test_planted_optimum_is_found():
    history = [Trial(i, "gru", {"x": x, "c": "a"}, float(x > 0.5), "ok")
               for i, x in enumerate([0.05, 0.9, 0.3, 0.7, 0.45, 0.6, 0.1, 0.95, 0.2, 0.55])]
    hits = [tpe_suggest(history, PLANTED, seed)["x"] > 0.5 for seed in range(200)]
    assert np.mean(hits) >= 0.9


def test_short_history_falls_back_to_sample():
    history = _trials(PLANTED, lambda p: p["x"], 9)
    for seed in range(20):
        assert tpe_suggest(history, PLANTED, seed) == sample(PLANTED, seed)


def test_flat_history_falls_back_to_sample():
    history = _trials(PLANTED, lambda p: 0.5, 15)
    assert tpe_suggest(history, PLANTED, 3) == sample(PLANTED, 3)


def test_failed_trials_are_ignored():
    history = _trials(PLANTED, lambda p: p["x"], 9)
    history.append(Trial(9, "gru", sample(PLANTED, 99), float("nan"), "failed"))
    assert tpe_suggest(history, PLANTED, 1) == sample(PLANTED, 1)


@pytest.mark.parametrize("arch", ARCHS)
def test_suggestions_stay_in_bounds(arch):
    space = table_space(arch)
    rng = np.random.default_rng(0)
    history = _trials(space, lambda p: float(rng.random()), 16)
    for seed in range(30):
        assert space.contains(tpe_suggest(history, space, seed))


def test_split_history_top_quarter():
    history = _trials(PLANTED, lambda p: p["x"], 12)
    good, bad = split_history(history)
    assert len(good) == 3 and len(bad) == 9
    assert min(t.objective for t in good) >= max(t.objective for t in bad)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6))
def test_suggestion_respects_fixed_values(seed):
    space = table_space("gru").with_fixed(epochs=2, window=12)
    history = _trials(space, lambda p: p["learning_rate"], 12)
    p = tpe_suggest(history, space, seed)
    assert p["epochs"] == 2 and p["window"] == 12


# -- sweep loop -----------------------------------------------------------------------------

def _quadratic(arch, p):
    return -(p["x"] - 0.3) ** 2


def test_budget_one_is_its_own_best():
    res = run_sweep(None, 1, spaces={"gru": PLANTED}, objective_fn=_quadratic)
    assert res.best("gru") is res.trials["gru"][0]


def test_running_best_is_monotone():
    res = run_sweep(None, 25, spaces={"gru": PLANTED}, objective_fn=_quadratic, seed=4)
    curve = res.running_best("gru")
    assert all(b >= a for a, b in zip(curve, curve[1:]))
    assert curve[-1] == res.best("gru").objective


def test_sweep_is_deterministic_and_prefixes_agree():
    a = run_sweep(None, 15, spaces={"gru": PLANTED}, objective_fn=_quadratic, seed=2)
    b = run_sweep(None, 20, spaces={"gru": PLANTED}, objective_fn=_quadratic, seed=2)
    assert [t.params for t in a.trials["gru"]] == [t.params for t in b.trials["gru"][:15]]


def test_failed_trial_is_recorded_and_sweep_continues(cohort, tmp_path):
    space = SearchSpace("gru", {"learning_rate": LogUniform(-8, -4)},
                        fixed={"epochs": 1, "batch_size": 64, "window": 12, "hidden_size": 8,
                               "hidden_dim": 8, "num_layers": 1, "dropout": 0.0, "fc_layers": 0,
                               "lr_decay": 1.0, "lr_step": 1, "weight_decay": 0.0, "pooling": "last",
                               "bidirectional": False, "fc_base": 32, "fc_growth": 1.0,
                               "bogus": 3})
    store = ResultStore(tmp_path / "trials.jsonl")
    res = run_sweep(cohort, 2, spaces={"gru": space}, categories=("LOS",), store=store)
    assert [t.status for t in res.trials["gru"]] == ["failed", "failed"]
    assert "ConfigError" in res.trials["gru"][0].error
    assert len(store.read()) == 2 and res.best("gru") is None


def test_real_trial_reproduces_objective(cohort):
    space = table_space("gru").with_fixed(epochs=1, batch_size=64, window=12, hidden_size=8,
                                          hidden_dim=8, num_layers=1, fc_layers=0, bidirectional=False)
    a = run_sweep(cohort, 2, spaces={"gru": space}, categories=("LOS", "ICD"), seed=3)
    b = run_sweep(cohort, 2, spaces={"gru": space}, categories=("LOS", "ICD"), seed=3)
    assert a.best("gru").objective == b.best("gru").objective
    assert all(t.ok for t in a.trials["gru"])


def test_bad_budget_and_method():
    with pytest.raises(ValueError):
        run_sweep(None, 0, objective_fn=_quadratic)
    with pytest.raises(ValueError):
        run_sweep(None, 3, method="grid", objective_fn=_quadratic)
