"""The two-stage model bundle and its enhancement pipeline.

A ModelBundle pairs the magnitude network (S2S) with the complex network
(RI2RI) and the STFT framing both were trained on. Networks see 256 frequency
bins: the Nyquist bin is dropped on the way in and reinserted as zero on the
way out.

Pipeline (two_stage_enhance):
    noisy -> stft -> log-magnitude / phase -> crop to 256 bins
          -> divide by the noisy log-magnitude STD -> S2S -> multiply back
          -> recombine with the noisy phase -> RI planes -> RI2RI
          -> reinsert the zero Nyquist bin -> istft
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Literal, Optional, Union

import attr
import numpy as np

from derevb.audio import Waveform
from derevb.autodiff.checkpoint import load_checkpoint, save_checkpoint
from derevb.autodiff.tensor import Parameter, Tensor, no_grad
from derevb.errors import ConfigError, InvalidInput
from derevb.models.unet import UNet, UNetConfig, ri2ri_config, ri2ri_forward, s2s_config, s2s_forward
from derevb.schema import structure, unstructure
from derevb.stft import MagPhase, StftConfig, decompose, istft, spectrogram_from_ri, stft

logger = logging.getLogger(__name__)

NormalizationMode = Literal["utterance_std", "none"]
NORMALIZATION_MODES = ("utterance_std", "none")
_MIN_STD = 1e-8


def model_plane(plane: np.ndarray, n_freq: int) -> np.ndarray:
    """L x K spectral plane -> n_freq x L model layout (Nyquist bin dropped)."""
    return np.ascontiguousarray(plane[:, :n_freq].T)


def normalization_scale(log_mag: np.ndarray, mode: str) -> float:
    """Scalar the S2S input is divided by (and its output multiplied by)."""
    if mode == "none":
        return 1.0
    std = float(np.std(log_mag))
    return std if std > _MIN_STD else 1.0


def ri_planes(log_mag: np.ndarray, phase: np.ndarray) -> np.ndarray:
    """(F, L) log-magnitude and phase -> (2, F, L) real/imaginary planes."""
    magnitude = np.exp(log_mag)
    return np.stack([magnitude * np.cos(phase), magnitude * np.sin(phase)])


def model_ri_to_spectrum(ri: np.ndarray, n_bins: int) -> np.ndarray:
    """(2, F, L) planes -> (L, n_bins, 2) with zero bins appended above F."""
    planes = np.transpose(ri, (2, 1, 0))
    missing = n_bins - planes.shape[1]
    return np.pad(planes, ((0, 0), (0, missing), (0, 0)))


def waveform_from_model_ri(
    ri: np.ndarray, cfg: StftConfig, source_len: int, sample_rate_hz: int
) -> Waveform:
    spectrum = model_ri_to_spectrum(np.asarray(ri, dtype=np.float64), cfg.n_bins)
    return istft(spectrogram_from_ri(spectrum, cfg, source_len, sample_rate_hz))


@attr.define(eq=False)
class ModelBundle:
    """S2S and RI2RI networks with the framing they operate on.

    Attributes:
        s2s: Magnitude network (1 channel, attention, tanh-gain head).
        ri2ri: Complex network (2 channels, no attention, linear head).
        stft_cfg: STFT framing; both networks take stft_cfg.n_bins - 1 bins.
        normalization: "utterance_std" divides the S2S input by the noisy
            log-magnitude STD; "none" feeds it unscaled.
    """

    s2s: UNet
    ri2ri: UNet
    stft_cfg: StftConfig = attr.Factory(StftConfig)
    normalization: str = "utterance_std"

    def __attrs_post_init__(self) -> None:
        n_freq = self.stft_cfg.n_bins - 1
        for name, net in (("s2s", self.s2s), ("ri2ri", self.ri2ri)):
            if net.config.n_freq != n_freq:
                raise InvalidInput(
                    f"{name} takes {net.config.n_freq} bins, STFT provides {n_freq} after the crop",
                    field=f"{name}.n_freq",
                )
        if self.normalization not in NORMALIZATION_MODES:
            raise InvalidInput(
                f"normalization must be one of {NORMALIZATION_MODES}", field="normalization"
            )

    @classmethod
    def create(
        cls,
        s2s_cfg: Optional[UNetConfig] = None,
        ri2ri_cfg: Optional[UNetConfig] = None,
        stft_cfg: Optional[StftConfig] = None,
        seed: int = 0,
        normalization: str = "utterance_std",
    ) -> ModelBundle:
        """Initialize both networks from independent streams of one seed."""
        stft_cfg = stft_cfg or StftConfig()
        s2s_seq, ri_seq = np.random.SeedSequence(seed).spawn(2)
        return cls(
            s2s=UNet(s2s_cfg or s2s_config(), int(s2s_seq.generate_state(1)[0]), prefix="s2s"),
            ri2ri=UNet(ri2ri_cfg or ri2ri_config(), int(ri_seq.generate_state(1)[0]), prefix="ri2ri"),
            stft_cfg=stft_cfg,
            normalization=normalization,
        )

    @property
    def n_freq(self) -> int:
        return self.stft_cfg.n_bins - 1

    def parameters(self) -> list[Parameter]:
        return self.s2s.parameters() + self.ri2ri.parameters()

    def config_document(self) -> dict[str, Any]:
        return {
            "s2s": self.s2s.config.to_dict(),
            "ri2ri": self.ri2ri.config.to_dict(),
            "stft": unstructure(self.stft_cfg),
            "normalization": self.normalization,
        }

    def snapshot(self) -> dict[str, np.ndarray]:
        """Copies of every parameter array, by name."""
        return {p.name: p.data.copy() for p in self.parameters()}

    def load_snapshot(self, values: dict[str, np.ndarray]) -> None:
        """Overwrite parameter values from a snapshot of an identically configured bundle."""
        for param in self.parameters():
            if values[param.name].shape != param.shape:
                raise InvalidInput(f"snapshot shape mismatch for {param.name}", field=param.name)
            param.data = values[param.name].astype(param.data.dtype, copy=True)

    def clone(self) -> ModelBundle:
        """Independent copy with equal configs, values and freeze flags."""
        twin = ModelBundle.create(
            self.s2s.config, self.ri2ri.config, self.stft_cfg, normalization=self.normalization
        )
        twin.load_snapshot(self.snapshot())
        for mine, theirs in zip(self.parameters(), twin.parameters()):
            theirs.frozen = mine.frozen
        return twin


def s2s_log_mag(bundle: ModelBundle, noisy: MagPhase) -> np.ndarray:
    """Enhanced log-magnitude (n_freq x L) from the S2S network, denormalized."""
    plane = model_plane(noisy.log_mag, bundle.n_freq)
    scale = normalization_scale(plane, bundle.normalization)
    with no_grad():
        out = s2s_forward(bundle.s2s, Tensor(plane[None] / scale))
    return out.data[0].astype(np.float64) * scale


def ri2ri_planes(bundle: ModelBundle, ri: np.ndarray) -> np.ndarray:
    """RI2RI output for (2, n_freq, L) input planes."""
    with no_grad():
        out = ri2ri_forward(bundle.ri2ri, Tensor(ri))
    return out.data.astype(np.float64)


def two_stage_enhance(noisy: Waveform, bundle: ModelBundle) -> Waveform:
    """Dereverberate a waveform with the S2S -> RI2RI pipeline.

    The output has the input's length and sample rate.
    """
    cfg = bundle.stft_cfg
    noisy_mp = decompose(stft(noisy, cfg))
    enhanced = s2s_log_mag(bundle, noisy_mp)
    phase = model_plane(noisy_mp.phase, bundle.n_freq)
    refined = ri2ri_planes(bundle, ri_planes(enhanced, phase))
    return waveform_from_model_ri(refined, cfg, len(noisy), noisy.sample_rate_hz)


def s2s_enhance(
    noisy: Waveform, bundle: ModelBundle, phase_source: Optional[Waveform] = None
) -> Waveform:
    """S2S magnitude resynthesized with the noisy phase, or with phase_source's phase."""
    cfg = bundle.stft_cfg
    noisy_mp = decompose(stft(noisy, cfg))
    phase_mp = decompose(stft(phase_source, cfg)) if phase_source is not None else noisy_mp
    if phase_mp.phase.shape != noisy_mp.phase.shape:
        raise InvalidInput("phase source and noisy input differ in length")
    enhanced = s2s_log_mag(bundle, noisy_mp)
    planes = ri_planes(enhanced, model_plane(phase_mp.phase, bundle.n_freq))
    return waveform_from_model_ri(planes, cfg, len(noisy), noisy.sample_rate_hz)


def ri2ri_enhance(
    noisy: Waveform, bundle: ModelBundle, magnitude_source: Optional[Waveform] = None
) -> Waveform:
    """RI2RI alone, on the noisy spectrum or on magnitude_source's magnitude with the noisy phase."""
    cfg = bundle.stft_cfg
    noisy_mp = decompose(stft(noisy, cfg))
    mag_mp = decompose(stft(magnitude_source, cfg)) if magnitude_source is not None else noisy_mp
    if mag_mp.log_mag.shape != noisy_mp.log_mag.shape:
        raise InvalidInput("magnitude source and noisy input differ in length")
    planes = ri_planes(
        model_plane(mag_mp.log_mag, bundle.n_freq), model_plane(noisy_mp.phase, bundle.n_freq)
    )
    refined = ri2ri_planes(bundle, planes)
    return waveform_from_model_ri(refined, cfg, len(noisy), noisy.sample_rate_hz)


def save_bundle(path: Union[str, Path], bundle: ModelBundle) -> Path:
    """Checkpoint both networks with the bundle config in the header."""
    return save_checkpoint(path, bundle.parameters(), bundle.config_document())


def load_bundle(path: Union[str, Path]) -> ModelBundle:
    """Rebuild a bundle from a checkpoint, restoring values and freeze flags.

    Raises:
        ConfigError: If the embedded config is invalid.
        InvalidInput / ShapeError: If the stored tensors do not fit the config.
    """
    checkpoint = load_checkpoint(path)
    document = checkpoint.config
    missing = [key for key in ("s2s", "ri2ri", "stft") if key not in document]
    if missing:
        raise ConfigError(f"checkpoint config lacks {missing[0]!r}", field=missing[0])

    bundle = ModelBundle.create(
        structure(UNetConfig, document["s2s"], "s2s"),
        structure(UNetConfig, document["ri2ri"], "ri2ri"),
        structure(StftConfig, document["stft"], "stft"),
        normalization=document.get("normalization", "utterance_std"),
    )
    params = bundle.parameters()
    checkpoint.apply(params)
    for param in params:
        param.frozen = checkpoint.frozen[param.name]
    logger.info(f"Loaded model bundle from {path}")
    return bundle
