"""Reverberant, noisy mixture synthesis.

Realizes y(t) = {s * h}(t) + n(t) with synthetic room impulse responses: a
unit direct-path impulse (optionally delayed by the source distance) followed by
Gaussian noise whose envelope decays 60 dB over the requested RT60.

Functions:
    synth_rir: Exponential-decay RIR for a given RT60
    estimate_rt60: Schroeder backward-integration RT60 estimate
    convolve: Linear convolution truncated to the source length
    mix_at_snr: Add noise scaled to an exact energy SNR
    make_example: clean -> (reverberant, noisy) for a MixtureSpec
"""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Any, Literal, Optional

import attr
import numpy as np
from scipy.signal import convolve as scipy_convolve

from derevb.audio import Waveform, read_wav
from derevb.errors import InvalidInput
from derevb.sources import pink_noise, white_noise

logger = logging.getLogger(__name__)

SPEED_OF_SOUND_M_S = 343.0
MAX_PREDELAY_S = 0.010
# distances at or beyond this put the direct path outside the first 10 ms
MAX_SOURCE_DISTANCE_M = SPEED_OF_SOUND_M_S * MAX_PREDELAY_S
RT60_RANGE_S = (0.1, 1.5)

NoiseKind = Literal["white", "pink", "recorded-file"]
NOISE_KINDS: tuple[str, ...] = ("white", "pink", "recorded-file")


@attr.frozen(eq=False)
class RoomImpulseResponse:
    """Single-channel room impulse response.

    Attributes:
        taps: Filter coefficients; the direct path lies within the first 10 ms.
        sample_rate_hz: Rate the taps are sampled at.
        rt60_s: Nominal reverberation time (0 for an anechoic impulse).
        seed: RNG seed the tail was drawn from.
        predelay_s: Direct-path delay.
    """

    taps: np.ndarray = attr.field(converter=lambda v: np.asarray(v, dtype=np.float64))
    sample_rate_hz: int
    rt60_s: float
    seed: int = 0
    predelay_s: float = 0.0


def _finite(_inst: Any, attribute: Any, value: float) -> None:
    # snr_db = +inf is the noise-disabled sentinel
    positive_inf_ok = attribute.name == "snr_db" and value > 0
    if math.isnan(value) or (math.isinf(value) and not positive_inf_ok):
        raise InvalidInput(f"{attribute.name} must be finite, got {value}", field=attribute.name)


def _rt60_in_range(_inst: Any, attribute: Any, value: float) -> None:
    # 0 is the anechoic sentinel
    if value != 0.0 and not RT60_RANGE_S[0] <= value <= RT60_RANGE_S[1]:
        raise InvalidInput(
            f"rt60_s must be 0 (anechoic) or within {RT60_RANGE_S}, got {value}",
            field=attribute.name,
        )


def source_distance_in_range(_inst: Any, attribute: Any, value: float) -> None:
    if not (value >= 0.0 and value / SPEED_OF_SOUND_M_S < MAX_PREDELAY_S):
        raise InvalidInput(
            f"{attribute.name} must lie in [0, {MAX_SOURCE_DISTANCE_M:.2f}) m, got {value}",
            field=attribute.name,
        )


def _noise_kind(_inst: Any, attribute: Any, value: str) -> None:
    if value not in NOISE_KINDS:
        raise InvalidInput(
            f"noise_kind must be one of {NOISE_KINDS}, got {value!r}", field=attribute.name
        )


@attr.frozen
class MixtureSpec:
    """Acoustic conditions for one utterance.

    snr_db may be +inf to disable noise. rt60_s = 0 selects an impulse RIR.
    """

    rt60_s: float = attr.field(validator=[_finite, _rt60_in_range])
    snr_db: float = attr.field(default=20.0, converter=float, validator=_finite)
    noise_kind: str = attr.field(default="white", validator=_noise_kind)
    seed: int = 0
    source_distance_m: float = attr.field(default=1.0, validator=source_distance_in_range)
    drr_db: float = 0.0
    noise_path: Optional[str] = None
    rir_length_s: Optional[float] = None

    @property
    def predelay_s(self) -> float:
        if self.rt60_s == 0.0:
            return 0.0
        return self.source_distance_m / SPEED_OF_SOUND_M_S


@attr.frozen(eq=False)
class Mixture:
    """A clean utterance with its reverberant and noisy renditions."""

    clean: Waveform
    reverberant_x: Waveform
    noisy_y: Waveform
    rir: RoomImpulseResponse


def synth_rir(
    rt60_s: float,
    length_s: float,
    sample_rate_hz: int,
    seed: int,
    *,
    predelay_s: float = 0.0,
    drr_db: Optional[float] = 0.0,
) -> RoomImpulseResponse:
    """Generate an exponentially decaying noise RIR.

    Args:
        rt60_s: Time for the tail envelope to decay by 60 dB.
        length_s: RIR length; at least rt60_s.
        sample_rate_hz: Tap rate.
        seed: Tail noise seed.
        predelay_s: Direct-path delay, below 10 ms.
        drr_db: Direct-to-reverberant energy ratio the tail is scaled to. None
            leaves the tail at unit noise variance.

    Returns:
        RoomImpulseResponse with a unit direct impulse at predelay_s.

    Raises:
        InvalidInput: If rt60_s is not positive, length_s < rt60_s, the
            predelay leaves the first 10 ms, or no tail tap follows the direct path.
    """
    if not rt60_s > 0:
        raise InvalidInput(f"rt60_s must be positive, got {rt60_s}", field="rt60_s")
    if length_s < rt60_s:
        raise InvalidInput(
            f"length_s ({length_s}) must be at least rt60_s ({rt60_s})", field="length_s"
        )
    if not 0.0 <= predelay_s < MAX_PREDELAY_S:
        raise InvalidInput(
            f"predelay_s must lie in [0, {MAX_PREDELAY_S}), got {predelay_s}",
            field="predelay_s",
        )

    n_taps = int(round(length_s * sample_rate_hz))
    direct = int(round(predelay_s * sample_rate_hz))
    if n_taps < direct + 2:
        raise InvalidInput(
            f"length_s ({length_s}) leaves no reverberant tail after the direct path "
            f"at {sample_rate_hz} Hz",
            field="length_s",
        )
    rng = np.random.default_rng(seed)

    t = np.arange(n_taps - direct - 1) / sample_rate_hz
    tail = rng.standard_normal(t.shape[0]) * np.exp(-t * 3.0 * math.log(10.0) / rt60_s)
    if drr_db is not None:
        tail *= math.sqrt(10.0 ** (-drr_db / 10.0) / float(np.sum(tail**2)))

    taps = np.zeros(n_taps)
    taps[direct] = 1.0
    taps[direct + 1 :] = tail
    return RoomImpulseResponse(taps, sample_rate_hz, rt60_s, seed, predelay_s)


def impulse_rir(sample_rate_hz: int) -> RoomImpulseResponse:
    """Anechoic identity filter."""
    return RoomImpulseResponse(np.ones(1), sample_rate_hz, 0.0)


def energy_decay_curve_db(taps: np.ndarray) -> np.ndarray:
    """Schroeder backward integral of squared taps, in dB re its start."""
    energy = np.cumsum(taps[::-1] ** 2)[::-1]
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(energy / energy[0])


def estimate_rt60(
    taps: np.ndarray, sample_rate_hz: int, start_db: float = -5.0, decay_db: float = 20.0
) -> float:
    """Estimate RT60 from the Schroeder decay curve.

    Fits a line to the energy decay curve between start_db and
    start_db - decay_db and extrapolates to a 60 dB decay.

    Raises:
        InvalidInput: If the decay never reaches the end of the fit range.
    """
    edc = energy_decay_curve_db(np.asarray(taps, dtype=np.float64))
    end_db = start_db - decay_db
    in_range = np.nonzero((edc <= start_db) & (edc >= end_db))[0]
    if in_range.size < 2 or np.min(edc) > end_db:
        raise InvalidInput(f"decay curve does not span {start_db}..{end_db} dB")
    t = in_range / sample_rate_hz
    slope, _ = np.polyfit(t, edc[in_range], 1)
    return float(-60.0 / slope)


def convolve(s: Waveform, h: RoomImpulseResponse, method: str = "fft") -> Waveform:
    """Convolve a source with an RIR, keeping the first len(s) samples.

    Args:
        s: Source signal.
        h: Impulse response at the same sample rate.
        method: "fft" (default) or "direct".

    Raises:
        InvalidInput: On sample-rate mismatch.
    """
    if s.sample_rate_hz != h.sample_rate_hz:
        raise InvalidInput(
            f"sample rates differ: signal {s.sample_rate_hz} Hz, RIR {h.sample_rate_hz} Hz"
        )
    full = scipy_convolve(s.samples, h.taps, mode="full", method=method)
    return s.with_samples(full[: len(s)])


def mix_at_snr(x: Waveform, noise: Waveform, snr_db: float) -> Waveform:
    """Return x + g * noise with g set so the energy SNR equals snr_db.

    Only the first len(x) noise samples are used. snr_db = +inf returns x.

    Raises:
        InvalidInput: If noise is shorter than x, or either signal is silent.
    """
    if len(noise) < len(x):
        raise InvalidInput(f"noise has {len(noise)} samples, signal needs {len(x)}")
    if math.isinf(snr_db) and snr_db > 0:
        return x.with_samples(x.samples.copy())

    segment = noise.samples[: len(x)]
    signal_energy = float(np.sum(x.samples**2))
    noise_energy = float(np.sum(segment**2))
    if signal_energy == 0.0:
        raise InvalidInput("cannot set an SNR against a silent signal")
    if noise_energy == 0.0:
        raise InvalidInput("cannot scale silent noise to a finite SNR")
    gain = math.sqrt(signal_energy / (noise_energy * 10.0 ** (snr_db / 10.0)))
    return x.with_samples(x.samples + gain * segment)


def measured_snr_db(x: Waveform, y: Waveform) -> float:
    """Energy SNR of y against its clean component x."""
    residual = y.samples - x.samples
    return 10.0 * math.log10(float(np.sum(x.samples**2)) / float(np.sum(residual**2)))


def _make_noise(spec: MixtureSpec, n_samples: int, fs: int, rng: np.random.Generator) -> Waveform:
    if spec.noise_kind == "white":
        return Waveform(white_noise(n_samples, rng), fs)
    if spec.noise_kind == "pink":
        return Waveform(pink_noise(n_samples, rng), fs)

    if spec.noise_path is None:
        raise InvalidInput("noise_kind 'recorded-file' requires noise_path", field="noise_path")
    recorded = read_wav(Path(spec.noise_path))
    if recorded.sample_rate_hz != fs:
        raise InvalidInput(
            f"noise file is {recorded.sample_rate_hz} Hz, clean signal is {fs} Hz",
            field="noise_path",
        )
    repeats = math.ceil((n_samples + len(recorded)) / len(recorded))
    looped = np.tile(recorded.samples, repeats)
    offset = int(rng.integers(0, len(recorded)))
    return Waveform(looped[offset : offset + n_samples], fs)


def make_example(clean: Waveform, spec: MixtureSpec) -> Mixture:
    """Render the reverberant and noisy versions of a clean utterance.

    The RIR and noise draw from independent streams spawned from spec.seed, so
    the result is bit-identical for equal inputs.
    """
    fs = clean.sample_rate_hz
    rir_seq, noise_seq = np.random.SeedSequence(spec.seed).spawn(2)

    if spec.rt60_s == 0.0:
        rir = impulse_rir(fs)
    else:
        length_s = spec.rir_length_s or spec.rt60_s * 1.2 + spec.predelay_s
        rir = synth_rir(
            spec.rt60_s,
            max(length_s, spec.rt60_s),
            fs,
            int(rir_seq.generate_state(1)[0]),
            predelay_s=spec.predelay_s,
            drr_db=spec.drr_db,
        )
    reverberant = convolve(clean, rir)

    if math.isinf(spec.snr_db) and spec.snr_db > 0:
        noisy = reverberant.with_samples(reverberant.samples.copy())
    else:
        noise = _make_noise(spec, len(clean), fs, np.random.default_rng(noise_seq))
        noisy = mix_at_snr(reverberant, noise, spec.snr_db)

    logger.debug(
        f"Mixture seed={spec.seed}: rt60={spec.rt60_s}s snr={spec.snr_db}dB "
        f"predelay={spec.predelay_s * 1000:.2f}ms"
    )
    return Mixture(clean, reverberant, noisy, rir)
