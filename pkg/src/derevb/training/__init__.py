"""Staged training, objectives, augmentation and the fine-tuning ablation."""

from derevb.training.ablation import (
    AblationResult,
    compare_systems,
    comparison_table,
    evaluate_bundle,
    run_ablation,
)
from derevb.training.augment import SpecAugmentConfig, random_crop, spec_augment
from derevb.training.data import UtteranceFeatures, load_features, make_batch, prepare_features
from derevb.training.losses import loss_ri2ri, loss_ri_mse, loss_s2s
from derevb.training.loop import StageResult, TrainingConfig, TrainRecord, run_stage

__all__ = [
    "AblationResult",
    "SpecAugmentConfig",
    "StageResult",
    "TrainRecord",
    "TrainingConfig",
    "UtteranceFeatures",
    "compare_systems",
    "comparison_table",
    "evaluate_bundle",
    "load_features",
    "loss_ri2ri",
    "loss_ri_mse",
    "loss_s2s",
    "make_batch",
    "prepare_features",
    "random_crop",
    "run_ablation",
    "run_stage",
    "spec_augment",
]
