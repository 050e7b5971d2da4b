"""Cognitive-diagnosis models, their training loop and checkpoints."""

from .base import Batch, CognitiveModel, build_dataset, history_row, row_updates, update_incremental
from .checkpoint import MODEL_KINDS, load_checkpoint, save_checkpoint
from .irt import IrtModel, MirtModel, irt_predict, mirt_predict
from .nacd import NacdModel, clip, exercise_factor, knowledge_vector, nacd_predict, relative_index, student_factor
from .training import Adam, DivergenceError, TrainConfig, TrainResult, evaluate_auc, train

__all__ = [
    "Adam",
    "Batch",
    "CognitiveModel",
    "DivergenceError",
    "IrtModel",
    "MODEL_KINDS",
    "MirtModel",
    "NacdModel",
    "TrainConfig",
    "TrainResult",
    "build_dataset",
    "clip",
    "evaluate_auc",
    "exercise_factor",
    "history_row",
    "irt_predict",
    "knowledge_vector",
    "load_checkpoint",
    "mirt_predict",
    "nacd_predict",
    "relative_index",
    "row_updates",
    "save_checkpoint",
    "student_factor",
    "train",
    "update_incremental",
]
