"""The five training regimes and the epoch loop that drives them.

ST(t)            fresh model, only t's decoders
MT               fresh model, every task in the suite
PRETRAIN-OMIT(t) full-suite model trained on everything except t
FTD(t)           pretrain checkpoint, encoder frozen, t's decoders trained
FTF(t)           pretrain checkpoint, encoder and t's decoders trained

Each run evaluates on tune every epoch, keeps the selected epoch's weights,
scores test once (with sex subgroups) and may persist a checkpoint with a
JSON sidecar naming the regime, task, config hash, seed and epoch.
"""
from __future__ import annotations

import json
import logging
import math
import os
import time
import zlib
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .. import __version__
from ..autodiff import checkpoint
from ..data.dataset import SubsampleSpec, subsample
from ..errors import ConfigError, DataError
from ..hashing import config_hash
from ..models.bundle import ModelBundle
from ..tasks.specs import REPORTED_CATEGORIES, check_category, get_task, group, suite, tasks_for
from .batching import evaluation_samples, make_batch
from .config import TrainConfig
from .loop import evaluate, train_epoch

log = logging.getLogger(__name__)

KINDS = ("ST", "MT", "PRETRAIN-OMIT", "FTD", "FTF")
EVAL_BATCH = 512


@dataclass(frozen=True)
class Regime:
    kind: str
    task: Optional[str] = None
    pretrain: Optional[str] = None  # checkpoint path, FTD/FTF only

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown regime {self.kind!r}; expected one of {KINDS}")
        if self.kind == "MT":
            if self.task is not None:
                raise ConfigError("MT takes no task")
        else:
            if self.task is None:
                raise ConfigError(f"{self.kind} needs a task category")
            check_category(self.task)
        if self.kind in ("FTD", "FTF") and not self.pretrain:
            raise ConfigError(f"{self.kind}({self.task}) needs a PRETRAIN-OMIT checkpoint")

    @property
    def label(self):
        return self.kind if self.task is None else f"{self.kind}({self.task})"

    @property
    def finetune(self):
        return self.kind in ("FTD", "FTF")

    @property
    def single_task(self):
        return self.kind in ("ST", "FTD", "FTF")


def architecture_hash(enc_cfg, names):
    """What a fine-tuning run must share with its pretrain checkpoint."""
    return config_hash({"encoder": enc_cfg.to_dict(), "suite": sorted(names)})


def regime_hash(regime, enc_cfg, train_cfg, names, spec):
    return config_hash({
        "regime": regime.kind, "task": regime.task, "encoder": enc_cfg.to_dict(),
        "train": train_cfg.to_dict(), "suite": sorted(names),
        "subsample": [spec.mode, spec.fraction, spec.seed],
    })


def task_layout(regime, categories):
    """``(bundle task names, trained task names)`` for a regime over a suite."""
    full = [t.name for t in suite(categories)]
    if regime.kind == "MT":
        return full, full
    own = [t.name for t in tasks_for(group(regime.task))]
    if regime.kind == "ST":
        return own, own
    if regime.task not in categories:
        raise ConfigError(f"task {regime.task} is not in the suite {list(categories)}")
    if regime.kind == "PRETRAIN-OMIT":
        return full, [n for n in full if n not in own]
    return full, own


def category_scores(metrics, names):
    """Mean task value per category. ``metrics`` as returned by ``evaluate``."""
    by_cat = {}
    for n in names:
        cat = get_task(n).category
        for sub, (value, _, _) in metrics[n].items():
            by_cat.setdefault(cat, {}).setdefault(sub, []).append(value)
    out = {}
    for cat, subs in by_cat.items():
        out[cat] = {}
        for sub, vals in subs.items():
            good = [v for v in vals if not math.isnan(v)]
            out[cat][sub] = float(np.mean(good)) if good else float("nan")
    return out


def objective(metrics, names):
    """Mean over tasks of macro AUROC (regression through its analog)."""
    vals = [metrics[n]["all"][0] for n in names]
    good = [v for v in vals if not math.isnan(v)]
    return float(np.mean(good)) if good else float("nan")


def selection_score(regime, metrics, names):
    if regime.single_task:
        return category_scores(metrics, names)[regime.task]["all"]
    return objective(metrics, names)


def select_epoch(history, mode="best-tune"):
    """Index of the chosen epoch: the last one, or the first strict maximum."""
    if not history:
        raise ValueError("no epochs to select from")
    if mode == "final":
        return len(history) - 1
    best, best_i = -math.inf, 0
    for i, s in enumerate(history):
        if not math.isnan(s) and s > best:
            best, best_i = s, i
    return best_i


class EvalCache:
    """Evaluation batches per (split, tasks, window); they never change during a run."""

    def __init__(self, dataset):
        self.dataset = dataset
        self._store = {}

    def get(self, split, tasks, window, eval_seed, fts_max_len):
        key = (split, tuple(t.name for t in tasks), window, eval_seed, fts_max_len)
        if key not in self._store:
            samples = evaluation_samples(self.dataset.split(split), tasks, eval_seed)
            self._store[key] = [make_batch(samples[i:i + EVAL_BATCH], tasks, window, fts_max_len)
                                for i in range(0, len(samples), EVAL_BATCH)]
        return self._store[key]


@dataclass
class RegimeResult:
    regime: Regime
    seed: int
    subsample: SubsampleSpec
    config_hash: str
    epoch: int
    tune_history: list
    test: dict  # task -> subgroup -> (value, per_label, n)
    categories: dict  # category -> subgroup -> value
    objective: float
    n_train: int
    seconds: float
    checkpoint: Optional[str] = None
    trained: list = field(default_factory=list)
    bundle: object = field(default=None, repr=False)

    @property
    def fraction(self):
        """Training fraction for few-shot runs; female share removed for imbalanced ones."""
        return self.subsample.fraction if self.subsample.mode != "none" else 1.0

    def rows(self):
        """One results-store record per (reported category, subgroup)."""
        out = []
        for cat in REPORTED_CATEGORIES:
            if cat not in self.categories:
                continue
            for sub, value in sorted(self.categories[cat].items()):
                tasks = {n: {"macro": _num(self.test[n][sub][0]),
                             "per_label": [_num(v) for v in self.test[n][sub][1]],
                             "n": self.test[n][sub][2]}
                         for n in self.trained if get_task(n).category == cat}
                out.append({
                    "regime": self.regime.kind, "task": self.regime.task, "category": cat,
                    "seed": self.seed, "subsample": self.subsample.mode, "fraction": self.fraction,
                    "subgroup": sub, "value": _num(value), "tasks": tasks,
                    "epoch": self.epoch, "config_hash": self.config_hash,
                    "objective": _num(self.objective), "version": __version__,
                })
        return out


def _num(v):
    v = float(v)
    return None if math.isnan(v) else v


def checkpoint_paths(out_dir, regime, seed, chash):
    stem = f"{regime.kind.lower()}-{(regime.task or 'all').lower()}-s{seed}-{chash}"
    path = os.path.join(out_dir, stem + ".mtlb")
    return path, path + ".json"


def read_sidecar(path):
    side = path + ".json"
    if not os.path.exists(path) or not os.path.exists(side):
        raise DataError(f"pretrain checkpoint {path} (or its manifest) is missing")
    with open(side) as fh:
        return json.load(fh)


def _load_pretrain(bundle, regime, enc_cfg, bundle_names, own):
    meta = read_sidecar(regime.pretrain)
    if meta.get("regime") != "PRETRAIN-OMIT":
        raise ConfigError(f"{regime.pretrain} holds a {meta.get('regime')} run, not PRETRAIN-OMIT")
    if meta.get("task") != regime.task:
        raise ConfigError(f"checkpoint omitted {meta.get('task')}, but {regime.label} was requested")
    if meta.get("architecture") != architecture_hash(enc_cfg, bundle_names):
        raise ConfigError(f"checkpoint {regime.pretrain} was trained with a different architecture or suite")
    # decoders of the omitted task keep this bundle's fresh initialisation
    bundle.load(regime.pretrain, strict=True, skip=tuple(f"decoder.{n}." for n in own))
    return meta


def run_regime(regime: Regime, dataset, enc_cfg, train_cfg: TrainConfig,
               categories=REPORTED_CATEGORIES, spec: Optional[SubsampleSpec] = None,
               out_dir=None, cache: Optional[EvalCache] = None, seed=None) -> RegimeResult:
    """Train one regime and score it. ``seed`` overrides ``train_cfg.seed``."""
    started = time.perf_counter()
    train_cfg = train_cfg.validate()
    seed = train_cfg.seed if seed is None else int(seed)
    spec = spec or SubsampleSpec()
    categories = tuple(categories)
    bundle_names, names = task_layout(regime, categories)
    if not names:
        raise ConfigError(f"{regime.label} leaves no task to train")
    chash = regime_hash(regime, enc_cfg, train_cfg, bundle_names, spec)

    bundle = ModelBundle(enc_cfg, bundle_names, seed=seed)
    if regime.finetune:
        _load_pretrain(bundle, regime, enc_cfg, bundle_names, names)
    shared = bundle.shared_parameters()
    if regime.kind == "FTD":
        for p in shared:
            p.frozen = True
    trainable = [] if regime.kind == "FTD" else list(shared)
    for n in names:
        trainable.extend(bundle.decoder_parameters(n))

    train = dataset.split("train")
    if regime.kind != "PRETRAIN-OMIT":
        train = subsample(train, spec)
    if not train:
        raise DataError(f"{regime.label}: the training split is empty after subsampling")

    cache = cache or EvalCache(dataset)
    tasks = [bundle.decoder(n).task for n in names]
    window = enc_cfg.input_window_hours
    tune_batches = cache.get("tune", tasks, window, train_cfg.eval_seed, train_cfg.fts_max_len)
    rng = np.random.default_rng(np.random.SeedSequence([seed, zlib.crc32(regime.label.encode())]))

    history, best_state, best_score = [], None, -math.inf
    for epoch in range(train_cfg.epochs):
        loss = train_epoch(bundle, train, names, trainable, train_cfg, epoch, rng, regime.finetune)
        last = epoch == train_cfg.epochs - 1
        if (epoch + 1) % train_cfg.eval_every and not last:
            history.append(float("nan"))
            continue
        score = selection_score(regime, evaluate(bundle, tune_batches, names), names)
        history.append(score)
        log.info("%s seed %d epoch %d: loss %.4f tune %.4f", regime.label, seed, epoch, loss, score)
        if train_cfg.select == "best-tune" and not math.isnan(score) and score > best_score:
            best_score, best_state = score, bundle.state_dict()
    chosen = select_epoch(history, train_cfg.select)
    if train_cfg.select == "best-tune" and best_state is not None:
        bundle.load_state_dict(best_state, strict=True)

    test_batches = cache.get("test", tasks, window, train_cfg.eval_seed, train_cfg.fts_max_len)
    test = evaluate(bundle, test_batches, names, subgroups=True)
    result = RegimeResult(
        regime=regime, seed=seed, subsample=spec, config_hash=chash, epoch=chosen,
        tune_history=history, test=test, categories=category_scores(test, names),
        objective=objective(test, names), n_train=len(train),
        seconds=time.perf_counter() - started, trained=list(names),
    )
    if out_dir is not None:
        result.checkpoint = save_checkpoint(bundle, out_dir, regime, seed, chash, chosen,
                                            enc_cfg, bundle_names, names)
    result.bundle = bundle
    return result


def save_checkpoint(bundle, out_dir, regime, seed, chash, epoch, enc_cfg, bundle_names, names):
    os.makedirs(out_dir, exist_ok=True)
    path, side = checkpoint_paths(out_dir, regime, seed, chash)
    bundle.save(path)
    meta = {
        "regime": regime.kind, "task": regime.task, "config_hash": chash, "seed": seed,
        "epoch": epoch, "architecture": architecture_hash(enc_cfg, bundle_names),
        "suite": sorted(bundle_names), "trained": list(names), "version": __version__,
    }
    checkpoint.atomic_write(side, (json.dumps(meta, sort_keys=True, indent=1) + "\n").encode())
    return path
