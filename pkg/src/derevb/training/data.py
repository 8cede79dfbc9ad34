"""Training features and mini-batch assembly.

Each utterance is analysed once into model-layout planes (frequency x frames,
Nyquist bin dropped). Batches are then cut from those planes: every utterance
in a batch gets its own random crop window, shared by all of its planes, and
the waveform target of the complex network is resynthesized from the cropped
clean spectrum so it lines up sample for sample with the estimate.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from typing import Optional

import attr
import numpy as np

from derevb.audio import Waveform
from derevb.errors import InvalidInput
from derevb.manifest import Manifest, Triple, load_triple
from derevb.models.bundle import model_plane, normalization_scale, ri_planes, waveform_from_model_ri
from derevb.parallel import map_ordered
from derevb.stft import StftConfig, decompose, stft
from derevb.training.augment import CROP_FRAMES, SpecAugmentConfig, random_crop, spec_augment

logger = logging.getLogger(__name__)

STAGES = ("pretrain_s2s", "pretrain_ri2ri", "finetune")


@attr.frozen(eq=False)
class UtteranceFeatures:
    """Model-layout planes of one utterance.

    Attributes:
        noisy_log_mag / clean_log_mag: (F, L) log-magnitudes, not normalized.
        noisy_phase / clean_phase: (F, L) phases.
        scale: Divisor applied to the S2S input and target.
    """

    id: str
    noisy_log_mag: np.ndarray
    noisy_phase: np.ndarray
    clean_log_mag: np.ndarray
    clean_phase: np.ndarray
    scale: float
    clean: Waveform
    noisy: Waveform

    @property
    def n_frames(self) -> int:
        return int(self.noisy_log_mag.shape[1])


def prepare_features(
    triple: Triple, stft_cfg: StftConfig, n_freq: int, normalization: str = "utterance_std"
) -> UtteranceFeatures:
    noisy_mp = decompose(stft(triple.noisy, stft_cfg))
    clean_mp = decompose(stft(triple.clean, stft_cfg))
    noisy_log_mag = model_plane(noisy_mp.log_mag, n_freq)
    return UtteranceFeatures(
        id=triple.id,
        noisy_log_mag=noisy_log_mag,
        noisy_phase=model_plane(noisy_mp.phase, n_freq),
        clean_log_mag=model_plane(clean_mp.log_mag, n_freq),
        clean_phase=model_plane(clean_mp.phase, n_freq),
        scale=normalization_scale(noisy_log_mag, normalization),
        clean=triple.clean,
        noisy=triple.noisy,
    )


def load_features(
    manifest: Manifest,
    stft_cfg: StftConfig,
    n_freq: int,
    normalization: str = "utterance_std",
    jobs: Optional[int] = 1,
) -> list[UtteranceFeatures]:
    """Load every triple of a manifest and analyse it.

    Raises:
        InvalidInput: If the manifest is empty.
    """
    if len(manifest) == 0:
        raise InvalidInput("manifest has no utterances")
    features = map_ordered(
        lambda record: prepare_features(
            load_triple(manifest, record), stft_cfg, n_freq, normalization
        ),
        manifest.records,
        jobs,
    )
    logger.info(f"Prepared features for {len(features)} utterances")
    return features


def split_validation(
    features: Sequence[UtteranceFeatures], fraction: float
) -> tuple[list[UtteranceFeatures], list[UtteranceFeatures]]:
    """Hold out the last floor(n * fraction) utterances, keeping at least one for training."""
    if not 0.0 <= fraction < 1.0:
        raise InvalidInput(f"validation fraction must be in [0, 1), got {fraction}")
    n_val = min(int(len(features) * fraction), len(features) - 1)
    cut = len(features) - n_val
    return list(features[:cut]), list(features[cut:])


@attr.frozen(eq=False)
class Batch:
    """One mini-batch in network layout.

    Attributes:
        s2s_input / s2s_target: (N, 1, F, W) normalized log-magnitudes.
        scale: (N,) normalization divisors.
        noisy_phase: (N, F, W) noisy phase of the crop.
        ri_input: (N, 2, F, W) planes of clean magnitude with noisy phase.
        ri_target: (N, 2, F, W) clean planes.
        target_wave: (N, S) clean waveform resynthesized from the cropped clean planes.
    """

    s2s_input: np.ndarray
    s2s_target: np.ndarray
    scale: np.ndarray
    noisy_phase: np.ndarray
    ri_input: np.ndarray
    ri_target: np.ndarray
    target_wave: np.ndarray

    @property
    def size(self) -> int:
        return int(self.s2s_input.shape[0])


def synthesis_length(n_frames: int, cfg: StftConfig) -> int:
    return (n_frames - 1) * cfg.hop_len + cfg.frame_len


def make_batch(
    items: Sequence[UtteranceFeatures],
    stft_cfg: StftConfig,
    rng: np.random.Generator,
    crop_frames: int = CROP_FRAMES,
    augment: Optional[SpecAugmentConfig] = None,
) -> Batch:
    """Crop, optionally mask and stack a list of utterances.

    augment masks the S2S input only; callers pass it for the magnitude
    pre-training stage.
    """
    if not items:
        raise InvalidInput("a batch needs at least one utterance")
    source_len = synthesis_length(crop_frames, stft_cfg)

    s2s_in, s2s_out, phases, ri_in, ri_out, waves = [], [], [], [], [], []
    for item in items:
        (noisy_lm, noisy_ph, clean_lm, clean_ph), _ = random_crop(
            [item.noisy_log_mag, item.noisy_phase, item.clean_log_mag, item.clean_phase],
            rng,
            crop_frames,
        )
        if augment is not None:
            noisy_lm = spec_augment(noisy_lm, augment, rng)
        clean_ri = ri_planes(clean_lm, clean_ph)
        s2s_in.append(noisy_lm[None] / item.scale)
        s2s_out.append(clean_lm[None] / item.scale)
        phases.append(noisy_ph)
        ri_in.append(ri_planes(clean_lm, noisy_ph))
        ri_out.append(clean_ri)
        waves.append(
            waveform_from_model_ri(
                clean_ri, stft_cfg, source_len, item.clean.sample_rate_hz
            ).samples
        )

    return Batch(
        s2s_input=np.stack(s2s_in),
        s2s_target=np.stack(s2s_out),
        scale=np.array([item.scale for item in items]),
        noisy_phase=np.stack(phases),
        ri_input=np.stack(ri_in),
        ri_target=np.stack(ri_out),
        target_wave=np.stack(waves),
    )


def sample_batch(
    features: Sequence[UtteranceFeatures], batch_size: int, rng: np.random.Generator
) -> list[UtteranceFeatures]:
    """Draw min(batch_size, n) distinct utterances."""
    picks = rng.choice(len(features), size=min(batch_size, len(features)), replace=False)
    return [features[int(i)] for i in picks]
