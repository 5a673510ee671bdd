"""Search spaces, random sampling, a TPE suggester and the sweep loop."""
from .space import (
    ARCHITECTURES, Choice, IntUniform, LogNormal, LogUniform, SearchSpace, Uniform, sample, table_space,
    to_configs, to_params,
)
from .sweep import SweepResult, Trial, evaluate_params, run_sweep
from .tpe import GAMMA, MIN_HISTORY, N_CANDIDATES, split_history, tpe_suggest

__all__ = [
    "ARCHITECTURES", "Choice", "GAMMA", "IntUniform", "LogNormal", "LogUniform", "MIN_HISTORY",
    "N_CANDIDATES", "SearchSpace", "SweepResult", "Trial", "Uniform", "evaluate_params", "run_sweep",
    "sample", "split_history", "table_space", "to_configs", "to_params", "tpe_suggest",
]
