"""Training, checkpointing, validation and gradient checking."""

from .loss import bce_loss, clip_gradients, global_norm
from .checkpoint import (
    CheckpointError,
    ConfigHashMismatchError,
    CorruptCheckpointError,
    checkpoint_save,
    checkpoint_load,
)
from .validate import EmptyDatasetError, validate
from .trainer import TrainingError, NonFiniteLossError, train, write_history_csv
from .gradcheck import GradCheckResult, grad_check, run_grad_check, tiny_config

__all__ = [
    "bce_loss",
    "clip_gradients",
    "global_norm",
    "CheckpointError",
    "ConfigHashMismatchError",
    "CorruptCheckpointError",
    "checkpoint_save",
    "checkpoint_load",
    "EmptyDatasetError",
    "validate",
    "TrainingError",
    "NonFiniteLossError",
    "train",
    "write_history_csv",
    "GradCheckResult",
    "grad_check",
    "run_grad_check",
    "tiny_config",
]
