"""Deterministic clean-source and noise generators.

The workbench must run without downloading a speech corpus, so clean material
comes from two generators: multi-tone chirps and "pseudo-speech", a
source-filter signal with a pulse or noise excitation shaped by moving formant
resonators and a syllabic envelope with pauses. Noise is white or pink.

Every generator takes an explicit seed or Generator; none touches global RNG
state.
"""

from __future__ import annotations

import logging
from typing import Union

import numpy as np
from scipy.signal import lfilter

from derevb.audio import REFERENCE_SAMPLE_RATE_HZ, Waveform
from derevb.errors import InvalidInput

logger = logging.getLogger(__name__)

SeedLike = Union[int, np.random.Generator]

# (low, high) ranges in Hz for the three formants
_FORMANT_RANGES = ((300.0, 850.0), (900.0, 2300.0), (2400.0, 3400.0))
_FORMANT_BANDWIDTHS = (80.0, 120.0, 180.0)


def _rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _n_samples(duration_s: float, sample_rate_hz: int) -> int:
    n = int(round(duration_s * sample_rate_hz))
    if n <= 0:
        raise InvalidInput(f"duration must yield at least one sample, got {duration_s} s")
    return n


def white_noise(n_samples: int, seed: SeedLike) -> np.ndarray:
    """Unit-variance Gaussian noise."""
    return _rng(seed).standard_normal(n_samples)


def pink_noise(n_samples: int, seed: SeedLike) -> np.ndarray:
    """1/f noise: white noise with its spectrum scaled by 1/sqrt(f), unit variance."""
    white = _rng(seed).standard_normal(n_samples)
    spectrum = np.fft.rfft(white)
    scale = np.ones(spectrum.shape[0])
    scale[1:] = 1.0 / np.sqrt(np.arange(1, spectrum.shape[0]))
    scale[0] = 0.0
    pink = np.fft.irfft(spectrum * scale, n=n_samples)
    std = float(np.std(pink))
    return pink / std if std > 0 else pink


def chirp(
    duration_s: float,
    sample_rate_hz: int = REFERENCE_SAMPLE_RATE_HZ,
    f_start_hz: float = 150.0,
    f_end_hz: float = 400.0,
    n_harmonics: int = 6,
    amplitude: float = 0.5,
) -> Waveform:
    """Harmonic log-sweep with a slow amplitude modulation.

    Each harmonic h follows h * f(t), with f sweeping exponentially from
    f_start_hz to f_end_hz; harmonics above Nyquist are skipped.
    """
    n = _n_samples(duration_s, sample_rate_hz)
    t = np.arange(n) / sample_rate_hz
    ratio = f_end_hz / f_start_hz
    # instantaneous phase of an exponential sweep
    if np.isclose(ratio, 1.0):
        base_phase = 2.0 * np.pi * f_start_hz * t
    else:
        k = np.log(ratio) / duration_s
        base_phase = 2.0 * np.pi * f_start_hz * (np.exp(k * t) - 1.0) / k

    signal = np.zeros(n)
    f_max = max(f_start_hz, f_end_hz)
    for harmonic in range(1, n_harmonics + 1):
        if harmonic * f_max >= sample_rate_hz / 2:
            break
        signal += np.sin(harmonic * base_phase) / harmonic
    envelope = 0.6 + 0.4 * np.sin(2.0 * np.pi * 3.0 * t) ** 2
    signal *= envelope
    peak = float(np.max(np.abs(signal)))
    return Waveform(amplitude * signal / peak, sample_rate_hz)


def _resonator(frequency_hz: float, bandwidth_hz: float, fs: int) -> tuple[np.ndarray, np.ndarray]:
    radius = np.exp(-np.pi * bandwidth_hz / fs)
    theta = 2.0 * np.pi * frequency_hz / fs
    a = np.array([1.0, -2.0 * radius * np.cos(theta), radius**2])
    b = np.array([1.0 - radius])
    return b, a


def _syllable(length: int, fs: int, rng: np.random.Generator) -> np.ndarray:
    voiced = rng.random() < 0.75
    if voiced:
        f0_start = rng.uniform(90.0, 220.0)
        f0_end = f0_start * rng.uniform(0.8, 1.2)
        f0 = np.linspace(f0_start, f0_end, length)
        cycle = np.cumsum(f0 / fs)
        excitation = np.diff(np.floor(cycle), prepend=0.0)
        excitation += 0.05 * rng.standard_normal(length)
    else:
        excitation = 0.3 * rng.standard_normal(length)

    signal = excitation
    for (low, high), bandwidth in zip(_FORMANT_RANGES, _FORMANT_BANDWIDTHS):
        start, end = rng.uniform(low, high, size=2)
        # piecewise-constant formant track in 4 blocks keeps lfilter cheap
        out = np.zeros(length)
        zi = np.zeros(2)
        for block, frequency in enumerate(np.linspace(start, end, 4)):
            lo, hi = block * length // 4, (block + 1) * length // 4
            b, a = _resonator(float(frequency), bandwidth, fs)
            out[lo:hi], zi = lfilter(b, a, signal[lo:hi], zi=zi)
        signal = out
    return signal * np.hanning(length)


def pseudo_speech(
    duration_s: float,
    seed: SeedLike,
    sample_rate_hz: int = REFERENCE_SAMPLE_RATE_HZ,
    amplitude: float = 0.5,
) -> Waveform:
    """Speech-like signal: formant-filtered syllables separated by pauses.

    Syllables last 120-320 ms and pauses 40-200 ms; a quarter of the
    syllables are unvoiced (noise excitation).

    Args:
        duration_s: Output length in seconds.
        seed: Integer seed or Generator.
        sample_rate_hz: Output rate.
        amplitude: Peak amplitude of the result.

    Returns:
        Deterministic Waveform for a given seed.
    """
    rng = _rng(seed)
    n = _n_samples(duration_s, sample_rate_hz)
    signal = np.zeros(n)
    position = int(rng.uniform(0.02, 0.1) * sample_rate_hz)
    while position < n:
        length = int(rng.uniform(0.12, 0.32) * sample_rate_hz)
        length = min(length, n - position)
        if length >= 32:
            syllable = _syllable(length, sample_rate_hz, rng)
            peak = float(np.max(np.abs(syllable)))
            if peak > 0:
                signal[position : position + length] = syllable / peak * rng.uniform(0.4, 1.0)
        position += length + int(rng.uniform(0.04, 0.2) * sample_rate_hz)

    peak = float(np.max(np.abs(signal)))
    if peak == 0.0:
        logger.warning("pseudo_speech produced silence; duration too short for a syllable")
        return Waveform(signal, sample_rate_hz)
    return Waveform(amplitude * signal / peak, sample_rate_hz)
