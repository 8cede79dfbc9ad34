"""Short-time Fourier analysis/synthesis and magnitude/phase decoupling.

The transform frames the signal from sample 0 with no centering, zero-pads the
final partial frame, applies a periodic Hamming window and keeps the one-sided
spectrum. Synthesis is weighted overlap-add normalized by the summed squared
window, which reconstructs every sample whose normalizer is non-negligible.

Functions:
    stft: Waveform -> Spectrogram
    istft: Spectrogram -> Waveform
    decompose: Spectrogram -> MagPhase (log-magnitude and wrapped phase)
    recombine: magnitude of one MagPhase with the phase of another
    mag_phase_to_ri / ri_to_mag_phase: MagPhase <-> real/imaginary planes
"""

from __future__ import annotations

import logging
import math
from typing import Any

import attr
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import get_window

from derevb.audio import REFERENCE_SAMPLE_RATE_HZ, Waveform
from derevb.errors import InvalidInput, NumericalError, ShapeError

logger = logging.getLogger(__name__)

DEFAULT_FLOOR_EPS = 1e-7
NORMALIZER_FLOOR = 1e-8


def _positive(_inst: Any, attribute: Any, value: int) -> None:
    if value <= 0:
        raise InvalidInput(f"{attribute.name} must be positive, got {value}")


@attr.frozen
class StftConfig:
    """Framing parameters of the transform.

    Attributes:
        frame_len: Samples per frame (512 at 16 kHz).
        hop_len: Samples between frame starts (256).
        window: scipy window name; periodic variant is used.
        n_bins: Retained one-sided bins, always frame_len // 2 + 1.
    """

    frame_len: int = attr.field(default=512, validator=_positive)
    hop_len: int = attr.field(default=256, validator=_positive)
    window: str = "hamming"
    n_bins: int = attr.field()

    @n_bins.default
    def _default_bins(self) -> int:
        return self.frame_len // 2 + 1

    def __attrs_post_init__(self) -> None:
        if self.hop_len > self.frame_len:
            raise InvalidInput(
                f"hop_len ({self.hop_len}) must not exceed frame_len ({self.frame_len})",
                field="hop_len",
            )
        if self.n_bins != self.frame_len // 2 + 1:
            raise InvalidInput(
                f"n_bins must be frame_len // 2 + 1 = {self.frame_len // 2 + 1}",
                field="n_bins",
            )

    def window_coefficients(self) -> np.ndarray:
        return np.asarray(get_window(self.window, self.frame_len, fftbins=True))

    def n_frames(self, n_samples: int) -> int:
        """Frame count for a signal of n_samples: 1 + ceil(max(0, n - N) / hop)."""
        excess = max(0, n_samples - self.frame_len)
        return 1 + math.ceil(excess / self.hop_len)


@attr.frozen(eq=False)
class Spectrogram:
    """Complex one-sided STFT, L frames by K bins."""

    values: np.ndarray
    config: StftConfig
    source_len: int
    sample_rate_hz: int = REFERENCE_SAMPLE_RATE_HZ

    def __attrs_post_init__(self) -> None:
        if self.values.ndim != 2 or self.values.shape[1] != self.config.n_bins:
            raise ShapeError(
                f"spectrogram must be L x {self.config.n_bins}, got {self.values.shape}"
            )
        if self.values.shape[0] < 1:
            raise ShapeError("spectrogram needs at least one frame")

    @property
    def n_frames(self) -> int:
        return int(self.values.shape[0])


@attr.frozen(eq=False)
class MagPhase:
    """Natural-log magnitude and wrapped phase planes, both L x K."""

    log_mag: np.ndarray
    phase: np.ndarray
    config: StftConfig
    source_len: int
    sample_rate_hz: int = REFERENCE_SAMPLE_RATE_HZ

    def __attrs_post_init__(self) -> None:
        if self.log_mag.shape != self.phase.shape:
            raise ShapeError(
                f"log_mag {self.log_mag.shape} and phase {self.phase.shape} differ"
            )

    @property
    def magnitude(self) -> np.ndarray:
        return np.exp(self.log_mag)


def wrap_phase(phase: np.ndarray) -> np.ndarray:
    """Wrap radians into (-pi, pi]."""
    return np.pi - np.mod(np.pi - phase, 2.0 * np.pi)


def stft(wave: Waveform, cfg: StftConfig) -> Spectrogram:
    """Analyse a waveform into a one-sided complex spectrogram.

    Args:
        wave: Non-empty signal.
        cfg: Framing parameters.

    Returns:
        Spectrogram with cfg.n_frames(len(wave)) frames.

    Raises:
        InvalidInput: If the waveform is empty.
    """
    n = len(wave)
    if n == 0:
        raise InvalidInput("cannot transform an empty waveform")

    n_frames = cfg.n_frames(n)
    padded_len = (n_frames - 1) * cfg.hop_len + cfg.frame_len
    padded = np.zeros(padded_len)
    padded[:n] = wave.samples

    frames = sliding_window_view(padded, cfg.frame_len)[:: cfg.hop_len][:n_frames]
    values = np.fft.rfft(frames * cfg.window_coefficients(), axis=-1)
    return Spectrogram(values, cfg, n, wave.sample_rate_hz)


def overlap_add(frames: np.ndarray, hop_len: int) -> np.ndarray:
    """Sum frames (..., L, N) at hop spacing into signals (..., (L-1)*hop + N)."""
    n_frames, frame_len = frames.shape[-2], frames.shape[-1]
    total = (n_frames - 1) * hop_len + frame_len
    out = np.zeros(frames.shape[:-2] + (total,), dtype=frames.dtype)
    for index in range(n_frames):
        start = index * hop_len
        out[..., start : start + frame_len] += frames[..., index, :]
    return out


def frame_signal(signal: np.ndarray, n_frames: int, cfg: StftConfig) -> np.ndarray:
    """Cut (..., samples) into (..., n_frames, frame_len), zero-padding the tail."""
    total = (n_frames - 1) * cfg.hop_len + cfg.frame_len
    padded = np.zeros(signal.shape[:-1] + (total,), dtype=signal.dtype)
    keep = min(total, signal.shape[-1])
    padded[..., :keep] = signal[..., :keep]
    frames = sliding_window_view(padded, cfg.frame_len, axis=-1)
    return np.ascontiguousarray(frames[..., :: cfg.hop_len, :][..., :n_frames, :])


def synthesis_gain(cfg: StftConfig, n_frames: int) -> np.ndarray:
    """Reciprocal of the overlap-added squared window, zero where it vanishes.

    Raises:
        NumericalError: If the normalizer is below the floor everywhere.
    """
    window = cfg.window_coefficients()
    normalizer = overlap_add(np.tile(window**2, (n_frames, 1)), cfg.hop_len)
    valid = normalizer >= NORMALIZER_FLOOR
    if not np.any(valid):
        raise NumericalError("overlap-add normalizer is degenerate across the signal")
    if not np.all(valid):
        logger.debug(f"Zeroing {int(np.sum(~valid))} samples with vanishing normalizer")
    gain = np.zeros_like(normalizer)
    gain[valid] = 1.0 / normalizer[valid]
    return gain


def istft(spec: Spectrogram) -> Waveform:
    """Resynthesize a waveform by weighted overlap-add.

    Returns:
        Waveform truncated to spec.source_len.
    """
    cfg = spec.config
    frames = np.fft.irfft(spec.values, n=cfg.frame_len, axis=-1)
    frames = frames * cfg.window_coefficients()
    signal = overlap_add(frames, cfg.hop_len) * synthesis_gain(cfg, spec.n_frames)
    samples = np.zeros(spec.source_len)
    keep = min(spec.source_len, signal.shape[0])
    samples[:keep] = signal[:keep]
    return Waveform(samples, spec.sample_rate_hz)


def decompose(spec: Spectrogram, floor_eps: float = DEFAULT_FLOOR_EPS) -> MagPhase:
    """Split a spectrogram into floored log-magnitude and wrapped phase.

    Raises:
        InvalidInput: If floor_eps is not positive.
    """
    if not floor_eps > 0:
        raise InvalidInput(f"floor_eps must be positive, got {floor_eps}")
    log_mag = np.log(np.maximum(np.abs(spec.values), floor_eps))
    phase = np.angle(spec.values)
    phase = np.where(phase <= -np.pi, phase + 2.0 * np.pi, phase)
    return MagPhase(log_mag, phase, spec.config, spec.source_len, spec.sample_rate_hz)


def recombine(mag_src: MagPhase, phase_src: MagPhase) -> Spectrogram:
    """Pair the magnitude of mag_src with the phase of phase_src.

    Raises:
        ShapeError: If planes or framing configs differ.
    """
    if mag_src.log_mag.shape != phase_src.phase.shape:
        raise ShapeError(
            f"magnitude {mag_src.log_mag.shape} and phase {phase_src.phase.shape} "
            "planes differ in shape"
        )
    if mag_src.config != phase_src.config:
        raise ShapeError("magnitude and phase sources use different STFT configs")
    values = np.exp(mag_src.log_mag) * np.exp(1j * phase_src.phase)
    return Spectrogram(
        values, mag_src.config, mag_src.source_len, mag_src.sample_rate_hz
    )


def mag_phase_to_ri(mp: MagPhase) -> np.ndarray:
    """Real and imaginary planes stacked on a trailing axis: L x K x 2."""
    magnitude = np.exp(mp.log_mag)
    return np.stack([magnitude * np.cos(mp.phase), magnitude * np.sin(mp.phase)], axis=-1)


def ri_to_mag_phase(
    ri: np.ndarray,
    cfg: StftConfig,
    source_len: int,
    floor_eps: float = DEFAULT_FLOOR_EPS,
    sample_rate_hz: int = REFERENCE_SAMPLE_RATE_HZ,
) -> MagPhase:
    """Inverse of mag_phase_to_ri up to flooring."""
    spec = spectrogram_from_ri(ri, cfg, source_len, sample_rate_hz)
    return decompose(spec, floor_eps)


def spectrogram_from_ri(
    ri: np.ndarray,
    cfg: StftConfig,
    source_len: int,
    sample_rate_hz: int = REFERENCE_SAMPLE_RATE_HZ,
) -> Spectrogram:
    if ri.ndim != 3 or ri.shape[-1] != 2:
        raise ShapeError(f"RI tensor must be L x K x 2, got {ri.shape}")
    return Spectrogram(ri[..., 0] + 1j * ri[..., 1], cfg, source_len, sample_rate_hz)
