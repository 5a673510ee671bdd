"""Task battery definitions and label derivation."""
from .labels import (
    label_discharge,
    label_for,
    label_fts,
    label_readmission,
    label_rolling_event,
    label_static,
    label_wbm,
    sample_eval_points,
)
from .specs import (
    ALL_CATEGORIES,
    REPORTED_CATEGORIES,
    TASKS,
    TaskSpec,
    get_task,
    group,
    reported,
    suite,
    tasks_for,
)

__all__ = [
    "ALL_CATEGORIES", "REPORTED_CATEGORIES", "TASKS", "TaskSpec", "get_task", "group",
    "label_discharge", "label_for", "label_fts", "label_readmission",
    "label_rolling_event", "label_static", "label_wbm", "reported",
    "sample_eval_points", "suite", "tasks_for",
]
