"""Command line: ``gen-data``, ``run``, ``grid``, ``report`` and ``sweep``.

Exit codes: 0 success, 2 configuration or usage error, 3 data error,
4 numeric abort. ``MTLB_SEED`` supplies the master seed when ``--seed``
is not given.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, replace

from . import __version__
from .data.calibration import CalibrationAccumulator, reference_values, write_manifest
from .data.dataset import FEW_SHOT_GRID, SubsampleSpec, generate_cohort, load_dataset, save_dataset
from .data.generator import CalibrationTargets
from .errors import ConfigError, DataError, MTLError, NumericError, UsageError
from .experiment import ExperimentConfig, load_config, master_seed
from .hashing import config_hash
from .metrics import reports
from .metrics.store import ResultStore
from .tasks.specs import REPORTED_CATEGORIES, check_category
from .training.regimes import EvalCache, Regime, checkpoint_paths, regime_hash, run_regime, task_layout

log = logging.getLogger("mtl_ehr")

EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4
STORE_NAME = "results.jsonl"

_CALIBRATION_ROWS = (
    "mca:MOR-24", "mca:MOR-48", "mca:CMO-24", "mca:CMO-48", "mca:DNR-24", "mca:DNR-48",
    "mca:DIS-24", "mca:DIS-48", "mca:ICD", "mca:LOS", "mca:REA", "mca:ACU",
    "measured:Heart Rate", "icd:Circulatory", "icu_mortality", "female_rate",
)


# -- gen-data ------------------------------------------------------------------

def cmd_gen_data(args):
    seed = master_seed() if args.seed is None else args.seed
    if os.path.exists(args.out) and not args.force:
        raise UsageError(f"{args.out} exists; pass --force to overwrite")
    targets = CalibrationTargets() if args.adversarial is None else replace(
        CalibrationTargets(), adversarial=args.adversarial)
    ds = generate_cohort(seed, args.patients, targets, jobs=args.jobs)
    save_dataset(args.out, ds)
    acc = CalibrationAccumulator()
    for rec in ds.records:
        acc.add(rec)
    summary = acc.summary()
    for name, size in ds.split_sizes().items():
        summary[f"split:{name}"] = size
    manifest = args.calibration or args.out + ".calibration.txt"
    write_manifest(manifest, summary, targets, seed=seed)
    ref = reference_values()
    print(f"{'statistic':<24}{'target':>10}{'achieved':>10}")
    for key in _CALIBRATION_ROWS:
        if key in summary:
            tgt = ref.get(key)
            print(f"{key:<24}{'' if tgt is None else f'{tgt:.3f}':>10}{summary[key]:>10.3f}")
    sizes = ds.split_sizes()
    print(f"splits: train {sizes['train']} / tune {sizes['tune']} / test {sizes['test']}")
    print(f"wrote {args.out} and {manifest}")
    return 0


# -- cells: one regime x task x fraction x seed -----------------------------------

@dataclass(frozen=True)
class Cell:
    regime: str
    task: object
    fraction: float
    seed: int
    mode: str = "few-shot"

    def spec(self):
        if self.regime in ("MT", "PRETRAIN-OMIT") or (self.mode == "few-shot" and self.fraction == 1.0):
            return SubsampleSpec()
        return SubsampleSpec(self.mode, self.fraction, self.seed)

    def key(self, base: ExperimentConfig):
        return config_hash({
            "dataset": os.path.abspath(base.dataset), "encoder": base.encoder.to_dict(),
            "train": base.train.to_dict(), "categories": list(base.categories),
            "regime": self.regime, "task": self.task, "seed": self.seed,
            "subsample": [self.spec().mode, self.spec().fraction],
        })

    def pretrain(self):
        return Cell("PRETRAIN-OMIT", self.task, 1.0, self.seed)


_WORKER = {}


def _dataset(path):
    if _WORKER.get("path") != path:
        ds = load_dataset(path)
        _WORKER.update(path=path, dataset=ds, cache=EvalCache(ds))
    return _WORKER["dataset"], _WORKER["cache"]


def _pretrain_path(base, cell):
    regime = Regime("PRETRAIN-OMIT", cell.task)
    bundle_names, _ = task_layout(regime, base.categories)
    chash = regime_hash(regime, base.encoder, replace(base.train, seed=cell.seed), bundle_names,
                        SubsampleSpec())
    return checkpoint_paths(os.path.join(base.output, "checkpoints"), regime, cell.seed, chash)[0]


def execute_cell(base: ExperimentConfig, cell: Cell):
    """Train one cell and return its results-store rows."""
    dataset, cache = _dataset(base.dataset)
    pretrain = _pretrain_path(base, cell) if cell.regime in ("FTD", "FTF") else None
    regime = Regime(cell.regime, cell.task, pretrain)
    out_dir = os.path.join(base.output, "checkpoints")
    train = replace(base.train, seed=cell.seed)
    res = run_regime(regime, dataset, base.encoder, train, base.categories, cell.spec(),
                     out_dir=out_dir if cell.regime == "PRETRAIN-OMIT" else None, cache=cache)
    key = cell.key(base)
    rows = res.rows()
    for r in rows:
        r["cell"] = key
    if not rows:
        rows = [{"cell": key, "regime": cell.regime, "task": cell.task, "seed": cell.seed,
                 "category": None, "subgroup": "all", "value": None,
                 "config_hash": res.config_hash, "version": __version__}]
    return rows


def _cell_done(base, cell, done):
    if cell.key(base) not in done:
        return False
    if cell.regime == "PRETRAIN-OMIT":
        return os.path.exists(_pretrain_path(base, cell))
    return True


def plan_cells(base, cells, done):
    """Cells still to run, with missing pretrain dependencies scheduled first."""
    first, second = [], []
    for cell in cells:
        if cell.regime in ("FTD", "FTF"):
            dep = cell.pretrain()
            if not _cell_done(base, dep, done) and dep not in first:
                first.append(dep)
        if _cell_done(base, cell, done):
            continue
        (first if cell.regime == "PRETRAIN-OMIT" else second).append(cell)
    first = list(dict.fromkeys(first))
    return first, [c for c in dict.fromkeys(second) if c not in first]


def run_cells(base, cells, jobs=1):
    """Run every pending cell; returns the number executed."""
    store = ResultStore(os.path.join(base.output, STORE_NAME))
    done = store.completed_cells()
    first, second = plan_cells(base, cells, done)
    executed = 0
    for stage in (first, second):
        if not stage:
            continue
        if jobs > 1 and len(stage) > 1:
            with ProcessPoolExecutor(jobs) as pool:
                futures = {pool.submit(execute_cell, base, c): c for c in stage}
                for fut in as_completed(futures):
                    store.append(fut.result())
                    executed += 1
                    log.info("finished %s", futures[fut])
        else:
            for c in stage:
                store.append(execute_cell(base, c))
                executed += 1
                log.info("finished %s", c)
    return executed


def _seeds(cfg, arg):
    if arg is None:
        return list(cfg.seeds)
    return list(range(arg))


def cmd_run(args):
    cfg = load_config(args.config)
    _check_dataset(cfg)
    cells = [Cell(cfg.regime, cfg.task, cfg.subsample.fraction if cfg.subsample.mode != "none" else 1.0,
                  s, cfg.subsample.mode if cfg.subsample.mode != "none" else "few-shot")
             for s in _seeds(cfg, args.seeds)]
    n = run_cells(cfg, cells, args.jobs)
    print(f"{n} cell(s) executed; results in {os.path.join(cfg.output, STORE_NAME)}")
    return 0


def _csv(text, convert=str):
    return [convert(x) for x in text.split(",") if x.strip()]


def cmd_grid(args):
    cfg = load_config(args.config)
    _check_dataset(cfg)
    regimes = _csv(args.regimes)
    for r in regimes:
        Regime(r, None if r == "MT" else "MOR", "x")  # validates the name
    tasks = _csv(args.tasks) if args.tasks else list(cfg.categories)
    for t in tasks:
        check_category(t)
    if args.fractions in (None, "default"):
        fractions = list(FEW_SHOT_GRID)
    else:
        fractions = _csv(args.fractions, float)
    seeds = _seeds(cfg, args.seeds)
    cells = []
    for r in regimes:
        for t in ([None] if r == "MT" else tasks):
            fr = [1.0] if r in ("MT", "PRETRAIN-OMIT") else fractions
            for f in fr:
                for s in seeds:
                    cells.append(Cell(r, t, f, s, args.mode))
    cells = list(dict.fromkeys(cells))
    n = run_cells(cfg, cells, args.jobs)
    print(f"{len(cells)} cell(s) requested, {n} executed (pretrain dependencies included)")
    return 0


def _check_dataset(cfg):
    if not os.path.exists(cfg.dataset):
        raise DataError(f"dataset {cfg.dataset} not found; create it with gen-data")


# -- report --------------------------------------------------------------------

def cmd_report(args):
    rows = ResultStore(args.store).read()
    rows = [r for r in rows if r.get("kind") != "trial" and r.get("category")]
    if not rows:
        raise DataError(f"{args.store} holds no regime results")
    seed = master_seed() if args.seed is None else args.seed
    out = args.out or os.path.dirname(os.path.abspath(args.store))
    os.makedirs(out, exist_ok=True)
    present = {r["category"] for r in rows}
    cats = [c for c in REPORTED_CATEGORIES if c in present]
    wanted = [k for k in ("table2", "negative_transfer", "fewshot_curves", "discrepancy") if getattr(args, k)]
    if not wanted:
        wanted = ["table2", "negative_transfer", "fewshot_curves", "discrepancy"]
    written = []
    if "table2" in wanted:
        written.append(reports.table2(rows, os.path.join(out, "table2.csv"), seed, cats))
    if "negative_transfer" in wanted:
        written.append(reports.negative_transfer_csv(rows, os.path.join(out, "negative_transfer.csv"), seed, cats))
    if "discrepancy" in wanted:
        written.append(reports.discrepancy_csv(rows, os.path.join(out, "discrepancy.csv"), seed, cats))
    if "fewshot_curves" in wanted:
        try:
            written.extend(reports.fewshot_figures(rows, out, seed, cats))
        except DataError:
            if args.fewshot_curves:
                raise
    for p in written:
        print(p)
    return 0


# -- sweep ---------------------------------------------------------------------

def cmd_sweep(args):
    from .hypersearch import run_sweep, table_space

    seed = master_seed() if args.seed is None else args.seed
    dataset = load_dataset(args.data)
    archs = _csv(args.arch)
    fixed = {}
    for item in args.fix or ():
        name, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--fix expects name=value, got {item!r}")
        try:
            fixed[name] = json.loads(value)
        except json.JSONDecodeError:
            fixed[name] = value
    spaces = {}
    for arch in archs:
        space = table_space(arch)
        unknown = set(fixed) - set(space.names)
        if unknown:
            raise UsageError(f"{arch} has no search dimension {sorted(unknown)}")
        spaces[arch] = space.with_fixed(**fixed)
    store = ResultStore(args.out)
    res = run_sweep(dataset, args.budget, archs, method=args.method, seed=seed, spaces=spaces,
                    store=store, jobs=args.jobs, train_seed=seed)
    for arch in archs:
        best = res.best(arch)
        if best is None:
            print(f"{arch}: no trial completed")
        else:
            print(f"{arch}: best objective {best.objective:.4f} (trial {best.index})")
            print(json.dumps(best.params, sort_keys=True))
    return 0


# -- entry point -----------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="mtl-ehr", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate a synthetic cohort and its calibration manifest")
    g.add_argument("--seed", type=int)
    g.add_argument("--patients", type=int, default=21876)
    g.add_argument("--out", required=True)
    g.add_argument("--calibration", help="manifest path (default: OUT.calibration.txt)")
    g.add_argument("--adversarial", choices=("ICD", "LOS", "REA"))
    g.add_argument("--jobs", type=int, default=1)
    g.add_argument("--force", action="store_true")
    g.set_defaults(func=cmd_gen_data)

    r = sub.add_parser("run", help="run one configured regime for each seed")
    r.add_argument("config")
    r.add_argument("--seeds", type=int, help="use seeds 0..N-1 instead of the config's list")
    r.add_argument("--jobs", type=int, default=1)
    r.set_defaults(func=cmd_run)

    gr = sub.add_parser("grid", help="run regime x task x fraction x seed, resuming completed cells")
    gr.add_argument("config")
    gr.add_argument("--regimes", default="ST,MT,FTD,FTF")
    gr.add_argument("--tasks", help="comma-separated task categories (default: the config's suite)")
    gr.add_argument("--fractions", help="comma-separated fractions, or 'default' for the few-shot grid")
    gr.add_argument("--mode", choices=("few-shot", "imbalanced"), default="few-shot")
    gr.add_argument("--seeds", type=int)
    gr.add_argument("--jobs", type=int, default=1)
    gr.set_defaults(func=cmd_grid)

    rp = sub.add_parser("report", help="emit CSV tables and SVG curves from a results store")
    rp.add_argument("store")
    rp.add_argument("--out")
    rp.add_argument("--seed", type=int)
    rp.add_argument("--table2", action="store_true")
    rp.add_argument("--negative-transfer", dest="negative_transfer", action="store_true")
    rp.add_argument("--fewshot-curves", dest="fewshot_curves", action="store_true")
    rp.add_argument("--discrepancy", action="store_true")
    rp.set_defaults(func=cmd_report)

    sw = sub.add_parser("sweep", help="hyperparameter search with MT runs")
    sw.add_argument("--data", required=True)
    sw.add_argument("--budget", type=int, default=20)
    sw.add_argument("--arch", default="gru")
    sw.add_argument("--method", choices=("tpe", "random"), default="tpe")
    sw.add_argument("--seed", type=int)
    sw.add_argument("--out", default="sweep.jsonl")
    sw.add_argument("--fix", action="append", metavar="NAME=VALUE",
                    help="pin a search dimension (repeatable), e.g. --fix epochs=3")
    sw.add_argument("--jobs", type=int, default=1)
    sw.set_defaults(func=cmd_sweep)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except MTLError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code if hasattr(exc, "exit_code") else 1


if __name__ == "__main__":
    sys.exit(main())
