"""Waveform type and RIFF/WAVE file I/O.

Waveforms are the universal I/O currency of derevb: every synthesis, analysis
and enhancement step consumes and produces them. WAV files are read and
written through soundfile; only mono files are accepted.

Functions:
    read_wav: Load a mono WAV file as a Waveform
    write_wav: Store a Waveform as 16-bit PCM or 32-bit float WAV
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Literal, Union

import attr
import numpy as np
import soundfile as sf

from derevb.errors import InvalidInput

logger = logging.getLogger(__name__)

REFERENCE_SAMPLE_RATE_HZ = 16000

WavSubtype = Literal["PCM_16", "FLOAT"]


def _as_samples(value: Any) -> np.ndarray:
    samples = np.asarray(value, dtype=np.float64)
    if samples.ndim != 1:
        raise InvalidInput(
            f"waveform samples must be one-dimensional, got shape {samples.shape}",
            field="samples",
        )
    return samples


def _check_finite(_inst: Any, _attribute: Any, value: np.ndarray) -> None:
    if not np.all(np.isfinite(value)):
        raise InvalidInput("waveform contains NaN or Inf samples", field="samples")


def _check_rate(_inst: Any, _attribute: Any, value: int) -> None:
    if value <= 0:
        raise InvalidInput(
            f"sample_rate_hz must be positive, got {value}", field="sample_rate_hz"
        )


@attr.frozen(eq=False)
class Waveform:
    """Mono time-domain signal.

    Attributes:
        samples: Real amplitudes, nominally in [-1, 1], float64.
        sample_rate_hz: Sampling rate in Hz (16000 in the reference setup).
    """

    samples: np.ndarray = attr.field(converter=_as_samples, validator=_check_finite)
    sample_rate_hz: int = attr.field(
        default=REFERENCE_SAMPLE_RATE_HZ, converter=int, validator=_check_rate
    )

    def __len__(self) -> int:
        return int(self.samples.shape[0])

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate_hz

    def with_samples(self, samples: Any) -> Waveform:
        """Return a new Waveform with the same sample rate."""
        return Waveform(samples, self.sample_rate_hz)

    def truncate(self, length: int) -> Waveform:
        return Waveform(self.samples[:length], self.sample_rate_hz)


def read_wav(path: Union[str, Path]) -> Waveform:
    """Read a mono RIFF/WAVE file.

    Args:
        path: WAV file path. 16-bit PCM and 32-bit float are the reference
            subtypes; anything libsndfile decodes is accepted.

    Returns:
        Waveform with float64 samples.

    Raises:
        InvalidInput: If the file cannot be decoded or has more than one channel.
    """
    path = Path(path)
    try:
        data, rate = sf.read(str(path), dtype="float64", always_2d=True)
    except (RuntimeError, sf.LibsndfileError) as e:
        raise InvalidInput(f"cannot read WAV file {path}: {e}") from e

    if data.shape[1] != 1:
        raise InvalidInput(
            f"{path} has {data.shape[1]} channels; only mono input is supported"
        )
    logger.debug(f"Read {path} ({data.shape[0]} samples at {rate} Hz)")
    return Waveform(data[:, 0], int(rate))


def wav_subtype(path: Union[str, Path]) -> WavSubtype:
    """Report whether a WAV file stores float or PCM samples."""
    info = sf.info(str(path))
    return "FLOAT" if info.subtype in ("FLOAT", "DOUBLE") else "PCM_16"


def write_wav(
    path: Union[str, Path], wave: Waveform, subtype: WavSubtype = "FLOAT"
) -> Path:
    """Write a Waveform as a mono WAV file.

    PCM output is clipped to [-1, 1] before quantization.

    Args:
        path: Destination path; parent directories are created.
        wave: Signal to store.
        subtype: "PCM_16" or "FLOAT" (32-bit).

    Returns:
        The written path.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    samples = wave.samples
    if subtype == "PCM_16":
        samples = np.clip(samples, -1.0, 1.0)
    sf.write(str(path), samples.astype(np.float32), wave.sample_rate_hz, subtype=subtype)
    logger.debug(f"Wrote {path} ({len(wave)} samples, {subtype})")
    return path
