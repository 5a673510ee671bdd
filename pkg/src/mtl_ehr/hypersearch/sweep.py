"""The sweep loop: suggest, train an MT model, record, repeat."""
from __future__ import annotations

import logging
import math
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

from ..errors import MTLError
from ..hashing import config_hash
from ..tasks.specs import REPORTED_CATEGORIES
from ..training.regimes import EvalCache, Regime, run_regime
from .space import SearchSpace, sample, table_space, to_configs
from .tpe import tpe_suggest

log = logging.getLogger(__name__)


@dataclass
class Trial:
    index: int
    arch: str
    params: dict
    objective: float = float("nan")
    status: str = "pending"  # ok | failed
    error: Optional[str] = None
    seconds: float = 0.0

    @property
    def ok(self):
        return self.status == "ok" and not math.isnan(self.objective)

    def to_row(self, sweep_hash):
        return {"kind": "trial", "sweep": sweep_hash, "index": self.index, "arch": self.arch,
                "params": self.params, "objective": None if math.isnan(self.objective) else self.objective,
                "status": self.status, "error": self.error,
                "config_hash": config_hash({"arch": self.arch, "params": self.params})}


@dataclass
class SweepResult:
    trials: dict = field(default_factory=dict)  # arch -> [Trial]

    def best(self, arch):
        """First trial with the highest objective, or None."""
        good = [t for t in self.trials.get(arch, []) if t.ok]
        if not good:
            return None
        top = max(t.objective for t in good)
        return next(t for t in good if t.objective == top)

    def running_best(self, arch):
        out, best = [], -math.inf
        for t in self.trials.get(arch, []):
            if t.ok and t.objective > best:
                best = t.objective
            out.append(best)
        return out


def evaluate_params(arch, params, dataset, categories=REPORTED_CATEGORIES, train_seed=0,
                    base_encoder=None, base_train=None, cache=None):
    """Tune-set objective of an MT run at its selected epoch."""
    enc, train = to_configs(arch, params, base_encoder, base_train)
    res = run_regime(Regime("MT"), dataset, enc, train, categories, cache=cache, seed=train_seed)
    return res.tune_history[res.epoch]


def _run_trial(job):
    trial, dataset, kwargs = job
    started = time.perf_counter()
    try:
        trial.objective = float(evaluate_params(trial.arch, trial.params, dataset, **kwargs))
        trial.status = "ok" if not math.isnan(trial.objective) else "failed"
        if trial.status == "failed":
            trial.error = "objective is undefined (every task degenerate)"
    except (MTLError, ValueError, FloatingPointError) as exc:
        trial.status, trial.error = "failed", f"{type(exc).__name__}: {exc}"
        log.debug("trial %d failed:\n%s", trial.index, traceback.format_exc())
    trial.seconds = time.perf_counter() - started
    return trial


def run_sweep(dataset, budget, archs=("gru",), method="tpe", seed=0, spaces=None,
              categories=REPORTED_CATEGORIES, train_seed=0, base_encoder=None, base_train=None,
              store=None, jobs=1, objective_fn=None):
    """Search each architecture independently with ``budget`` trials.

    ``method`` is ``"tpe"`` or ``"random"``. Trials are suggested in rounds
    of ``jobs`` from the history completed so far, so the outcome is
    deterministic for a fixed ``jobs``. A failed trial is recorded and the
    sweep goes on. ``objective_fn(arch, params)`` replaces training, for
    testing the search itself.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    if method not in ("tpe", "random"):
        raise ValueError(f"unknown search method {method!r}")
    spaces = spaces or {}
    result = SweepResult()
    sweep_hash = config_hash({"archs": list(archs), "method": method, "seed": seed, "budget": budget,
                              "categories": list(categories), "train_seed": train_seed})
    cache = EvalCache(dataset) if dataset is not None and jobs == 1 else None
    kwargs = dict(categories=categories, train_seed=train_seed, base_encoder=base_encoder,
                  base_train=base_train)
    pool = ProcessPoolExecutor(jobs) if jobs > 1 and objective_fn is None else None
    try:
        for arch in archs:
            space: SearchSpace = spaces.get(arch) or table_space(arch)
            history = result.trials.setdefault(arch, [])
            while len(history) < budget:
                round_size = min(jobs, budget - len(history))
                batch = []
                for j in range(round_size):
                    i = len(history) + j
                    trial_seed = seed * 100003 + i
                    params = (tpe_suggest(history, space, trial_seed) if method == "tpe"
                              else sample(space, trial_seed))
                    batch.append(Trial(i, arch, params))
                if objective_fn is not None:
                    for t in batch:
                        t.objective = float(objective_fn(arch, t.params))
                        t.status = "ok"
                    done = batch
                elif pool is not None:
                    done = list(pool.map(_run_trial, [(t, dataset, kwargs) for t in batch]))
                else:
                    done = [_run_trial((t, dataset, {**kwargs, "cache": cache})) for t in batch]
                for t in done:
                    log.info("%s trial %d: %s %.4f", arch, t.index, t.status, t.objective)
                    history.append(t)
                if store is not None:
                    store.append(t.to_row(sweep_hash) for t in done)
    finally:
        if pool is not None:
            pool.shutdown()
    return result
