"""Losses, Adam, the epoch loop and the training regimes."""
from .batching import Batch, evaluation_samples, make_batch, training_samples
from .config import TRAIN_PRESETS, TrainConfig
from .loop import evaluate, predict, task_losses, total_loss, train_epoch
from .optim import adam_step, clip_gradients, global_norm, zero_grad
from .regimes import (
    KINDS, EvalCache, Regime, RegimeResult, architecture_hash, category_scores, objective,
    read_sidecar, run_regime, select_epoch, task_layout,
)

__all__ = [
    "Batch", "EvalCache", "KINDS", "Regime", "RegimeResult", "TRAIN_PRESETS", "TrainConfig",
    "adam_step", "architecture_hash", "category_scores", "clip_gradients", "evaluate",
    "evaluation_samples", "global_norm", "make_batch", "objective", "predict", "read_sidecar",
    "run_regime", "select_epoch", "task_layout", "task_losses", "total_loss", "train_epoch",
    "training_samples", "zero_grad",
]
