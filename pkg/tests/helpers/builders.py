"""Small objects shared by several test modules."""

from __future__ import annotations

from typing import Any

import numpy as np

from derevb.audio import Waveform
from derevb.models.bundle import ModelBundle
from derevb.models.unet import ri2ri_config, s2s_config
from derevb.training.augment import SpecAugmentConfig
from derevb.training.loop import TrainingConfig

SAMPLE_RATE_HZ = 16000

# Architecture overrides for fast networks; n_freq stays 256
TINY_NET = {"depth": 2, "base_channels": 4, "attention_dim": 8}


def tiny_bundle_factory(seed: int = 0) -> ModelBundle:
    return ModelBundle.create(s2s_config(**TINY_NET), ri2ri_config(**TINY_NET), seed=seed)


def noise_wave(n_samples: int, seed: int, scale: float = 0.1) -> Waveform:
    return Waveform(np.random.default_rng(seed).standard_normal(n_samples) * scale, SAMPLE_RATE_HZ)


# Depth-2, 8-channel networks; large enough to overfit four utterances
DESK_NET = {"depth": 2, "base_channels": 8}
OVERFIT_UTTERANCES = 4
PRETRAIN_STEPS = 500
DESK_CROP_FRAMES = 64


def desk_bundle(seed: int = 0) -> ModelBundle:
    return ModelBundle.create(s2s_config(**DESK_NET), ri2ri_config(**DESK_NET), seed=seed)


def desk_training(stage: str, **overrides: Any) -> TrainingConfig:
    """Full-batch overfit settings without masking or validation."""
    settings: dict[str, Any] = {
        "stage": stage,
        "steps": PRETRAIN_STEPS,
        "batch_size": OVERFIT_UTTERANCES,
        "crop_frames": DESK_CROP_FRAMES,
        "validate_every": 0,
        "validation_fraction": 0.0,
        "spec_augment": SpecAugmentConfig(enabled=False),
    }
    settings.update(overrides)
    return TrainingConfig(**settings)
