"""The task battery: one :class:`TaskSpec` per prediction target.

Categories group tasks that are omitted together (the 24h/48h variants of a
rolling task, and next-hour regression with will-be-measured). Ten
categories are reported; ``NEXT-REG`` is trained but never reported.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from ..errors import RegistryError
from ..schema import CHANNEL_NAMES, DISCHARGE_NAMES, FTS_NAMES, ICD_NAMES, ACUITY_NAMES

ROLLING, STATIC, TERMINAL, AUTOREGRESSIVE = "rolling", "static", "terminal", "autoregressive"
BINARY, MULTILABEL, MULTICLASS, SEQ_MULTICLASS, REGRESSION = (
    "binary", "multilabel", "multiclass", "seq-multiclass", "regression")

# minimum hours of history before a rolling/autoregressive anchor
MIN_HISTORY = 12
STATIC_ANCHOR = 24
TERMINAL_WINDOW = 48
EVAL_POINTS = 10
LOS_THRESHOLD_HOURS = 72
READMIT_DAYS = 30


@dataclass(frozen=True)
class TaskSpec:
    name: str
    category: str
    temporal: str
    gap_hours: Optional[int]
    horizon_hours: Optional[int]
    label_type: str
    label_space: tuple
    mca_target: Optional[float] = None

    @property
    def width(self) -> int:
        """Decoder output width."""
        if self.label_type == BINARY:
            return 1
        return len(self.label_space)

    @property
    def loss_kind(self) -> str:
        return {BINARY: "bce", MULTILABEL: "bce", MULTICLASS: "ce",
                SEQ_MULTICLASS: "ce", REGRESSION: "mse"}[self.label_type]

    @property
    def mode(self) -> str:
        """Which window family supplies this task's samples."""
        return ROLLING if self.temporal in (ROLLING, AUTOREGRESSIVE) else self.temporal


def _rolling(cat, hours, gap, event, mca):
    return TaskSpec(f"{cat}-{hours}", cat, ROLLING, gap, hours, BINARY, (event,), mca)


TASKS = (
    _rolling("MOR", 24, 2, "death", 0.980),
    _rolling("MOR", 48, 6, "death", 0.962),
    _rolling("CMO", 24, 2, "cmo-order", 0.992),
    _rolling("CMO", 48, 6, "cmo-order", 0.987),
    _rolling("DNR", 24, 2, "dnr-order", 0.988),
    _rolling("DNR", 48, 6, "dnr-order", 0.981),
    TaskSpec("DIS-24", "DIS", ROLLING, 2, 24, MULTICLASS, DISCHARGE_NAMES, 0.730),
    TaskSpec("DIS-48", "DIS", ROLLING, 6, 48, MULTICLASS, DISCHARGE_NAMES, 0.473),
    TaskSpec("ICD", "ICD", STATIC, 12, None, MULTILABEL, ICD_NAMES, 0.691),
    TaskSpec("LOS", "LOS", STATIC, 12, None, BINARY, ("long-stay",), 0.529),
    TaskSpec("REA", "REA", TERMINAL, None, None, BINARY, ("readmitted",), 0.950),
    TaskSpec("ACU", "ACU", STATIC, 12, None, MULTICLASS, ACUITY_NAMES, 0.253),
    TaskSpec("WBM", "WBM", AUTOREGRESSIVE, 0, 1, MULTILABEL, CHANNEL_NAMES, 0.920),
    TaskSpec("NEXT-REG", "NEXT-REG", AUTOREGRESSIVE, 0, 1, REGRESSION, CHANNEL_NAMES),
    TaskSpec("FTS", "FTS", AUTOREGRESSIVE, None, None, SEQ_MULTICLASS, FTS_NAMES),
)
TASKS_BY_NAME = {t.name: t for t in TASKS}

REPORTED_CATEGORIES = ("MOR", "CMO", "DNR", "DIS", "ICD", "LOS", "REA", "ACU", "WBM", "FTS")
ALL_CATEGORIES = REPORTED_CATEGORIES + ("NEXT-REG",)

# omission unit -> categories removed with it
_GROUPS = {"WBM": ("WBM", "NEXT-REG")}


def get_task(name: str) -> TaskSpec:
    try:
        return TASKS_BY_NAME[name]
    except KeyError:
        raise RegistryError(f"unknown task {name!r}") from None


def check_category(cat: str) -> str:
    if cat not in ALL_CATEGORIES:
        raise RegistryError(f"unknown task category {cat!r}")
    return cat


def group(category: str) -> tuple:
    """Categories that travel together when ``category`` is trained alone or omitted."""
    check_category(category)
    return _GROUPS.get(category, (category,))


def tasks_for(categories) -> list:
    """TaskSpecs of the given categories, in registry order."""
    cats = {check_category(c) for c in categories}
    return [t for t in TASKS if t.category in cats]


def suite(categories=REPORTED_CATEGORIES, include_regression=True) -> list:
    """Tasks for a training ensemble; regression rides along with WBM."""
    cats = set(categories)
    if include_regression and "WBM" in cats:
        cats.add("NEXT-REG")
    return tasks_for(cats)


def reported(categories) -> list:
    return [c for c in REPORTED_CATEGORIES if c in set(categories)]
