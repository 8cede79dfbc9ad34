"""Shared test fixtures for derevb.

Fixtures:
    CLI Fixtures:
        - runner: Click CliRunner for CLI testing

    Signal Fixtures:
        - rng: Seeded numpy Generator
        - clean_wave: One second of pseudo-speech
        - mixture: Reverberant and noisy renditions of clean_wave

    Dataset Fixtures:
        - tiny_manifest: Three synthetic utterances written under tmp_path
        - tiny_bundle: Depth-2 networks small enough for unit tests
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from derevb.audio import Waveform
from derevb.manifest import Manifest, SynthSettings, synth_dataset
from derevb.models.bundle import ModelBundle
from derevb.signal_model import Mixture, MixtureSpec, make_example
from derevb.sources import pseudo_speech
from tests.helpers.builders import SAMPLE_RATE_HZ, tiny_bundle_factory

# =============================================================================
# CLI Fixtures
# =============================================================================


@pytest.fixture
def runner() -> CliRunner:
    """Create Click test runner for CLI testing.

    Returns:
        CliRunner instance for CLI testing.
    """
    return CliRunner()


# =============================================================================
# Signal Fixtures
# =============================================================================


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def clean_wave() -> Waveform:
    return pseudo_speech(1.0, seed=3, sample_rate_hz=SAMPLE_RATE_HZ)


@pytest.fixture
def mixture(clean_wave: Waveform) -> Mixture:
    return make_example(clean_wave, MixtureSpec(rt60_s=0.5, snr_db=20.0, seed=11))


# =============================================================================
# Dataset Fixtures
# =============================================================================


@pytest.fixture
def tiny_manifest(tmp_path: Path) -> Manifest:
    """Three 1-second utterances at RT60 0.5 s and 20 dB SNR."""
    settings = SynthSettings(n=3, rt60_s=(0.5, 0.5), snr_db=20.0, duration_s=1.0, seed=5)
    return synth_dataset(tmp_path / "data", settings)


@pytest.fixture
def tiny_bundle() -> ModelBundle:
    return tiny_bundle_factory()
