"""
Training and evaluation.

Public API:
    - TrainExample, load_manifest()
    - TrainConfig, Trainer, train(), importance_targets()
    - evaluate(), evaluate_predictions(), balanced_subset()
"""

from app.training.dataset import TrainExample, check_label, class_counts, example_from_detections, load_manifest
from app.training.evaluation import EvaluationReport, balanced_subset, evaluate, evaluate_predictions
from app.training.trainer import (
    StepLoss,
    TrainConfig,
    Trainer,
    TrainingHistory,
    get_default_train_config,
    importance_targets,
    scene_loss,
    train,
)

__all__ = [
    "EvaluationReport",
    "StepLoss",
    "TrainConfig",
    "TrainExample",
    "Trainer",
    "TrainingHistory",
    "balanced_subset",
    "check_label",
    "class_counts",
    "evaluate",
    "evaluate_predictions",
    "example_from_detections",
    "get_default_train_config",
    "importance_targets",
    "load_manifest",
    "scene_loss",
    "train",
]
