"""Integration test fixtures for derevb.

The desk corpus and the pre-trained bundle are session-scoped: building them
takes minutes of CPU time and every acceptance test reads them unchanged.

Environment Variables:
    DEREVB_JOBS: Worker count for per-utterance analysis (default: 1)
"""

from __future__ import annotations

import os

import pytest

from derevb.manifest import Manifest, SynthSettings, synth_dataset
from derevb.models.bundle import ModelBundle
from derevb.stft import StftConfig
from derevb.training.data import UtteranceFeatures, load_features
from derevb.training.loop import run_stage
from tests.helpers.builders import OVERFIT_UTTERANCES, desk_bundle, desk_training


@pytest.fixture(scope="session")
def jobs() -> int:
    return int(os.environ.get("DEREVB_JOBS", "1"))


@pytest.fixture(scope="session")
def desk_manifest(tmp_path_factory: pytest.TempPathFactory, jobs: int) -> Manifest:
    """16 utterances of 2 s, RT60 drawn from [0.3, 0.7] s, 20 dB SNR."""
    settings = SynthSettings(n=16, rt60_s=(0.3, 0.7), snr_db=20.0, duration_s=2.0, seed=7)
    return synth_dataset(tmp_path_factory.mktemp("desk"), settings, jobs)


@pytest.fixture(scope="session")
def overfit_features(desk_manifest: Manifest, jobs: int) -> list[UtteranceFeatures]:
    subset = desk_manifest.subset(desk_manifest.records[:OVERFIT_UTTERANCES])
    return load_features(subset, StftConfig(), 256, jobs=jobs)


@pytest.fixture(scope="session")
def pretrained_bundle(overfit_features: list[UtteranceFeatures]) -> ModelBundle:
    """Both networks pre-trained on the overfit subset; tests must clone before training."""
    bundle = desk_bundle()
    run_stage(desk_training("pretrain_s2s"), bundle, overfit_features)
    run_stage(desk_training("pretrain_ri2ri"), bundle, overfit_features)
    return bundle
