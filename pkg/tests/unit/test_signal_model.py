"""Tests for signal_model and sources modules.

Test Coverage:
    - synth_rir(): decay rate, direct path, validation, empty tails
    - estimate_rt60(): Schroeder estimate within 15% of the nominal RT60
    - convolve(): agreement with direct convolution, source-length truncation
    - mix_at_snr(): exact energy SNR, +inf sentinel, validation
    - make_example(): determinism, anechoic pass-through, noise kinds, source distance range
    - sources: generator determinism and level
"""

import math
from pathlib import Path

import numpy as np
import pytest

from derevb.audio import Waveform, write_wav
from derevb.errors import InvalidInput
from derevb.signal_model import (
    MixtureSpec,
    RoomImpulseResponse,
    convolve,
    estimate_rt60,
    make_example,
    measured_snr_db,
    mix_at_snr,
    synth_rir,
)
from derevb.sources import chirp, pink_noise, pseudo_speech, white_noise
from tests.helpers.oracles import direct_convolution

# =============================================================================
# A. RIR Synthesis Tests
# =============================================================================


@pytest.mark.unit
class TestSynthRir:
    """Tests for exponential-decay RIR generation."""

    @pytest.mark.parametrize("rt60_s", [0.2, 0.5, 0.8])
    def test_estimated_rt60_within_tolerance(self, rt60_s: float) -> None:
        """Schroeder RT60 of 10 seeded RIRs lies within 15% of nominal."""
        for seed in range(10):
            rir = synth_rir(rt60_s, rt60_s * 1.2, 16000, seed)
            estimate = estimate_rt60(rir.taps, 16000)
            assert abs(estimate - rt60_s) / rt60_s < 0.15

    def test_direct_path_at_predelay(self) -> None:
        """The unit impulse sits at the predelay sample."""
        rir = synth_rir(0.3, 0.4, 16000, 0, predelay_s=0.005)
        assert rir.taps[80] == 1.0
        assert np.all(rir.taps[:80] == 0.0)

    def test_drr_scales_tail(self) -> None:
        """Tail energy matches the requested direct-to-reverberant ratio."""
        rir = synth_rir(0.4, 0.5, 16000, 2, drr_db=6.0)
        tail_energy = float(np.sum(rir.taps[1:] ** 2))
        assert 10.0 * math.log10(1.0 / tail_energy) == pytest.approx(6.0)

    def test_same_seed_same_taps(self) -> None:
        """RIRs are deterministic per seed."""
        a = synth_rir(0.5, 0.6, 16000, 9)
        b = synth_rir(0.5, 0.6, 16000, 9)
        np.testing.assert_array_equal(a.taps, b.taps)

    def test_length_shorter_than_rt60_rejected(self) -> None:
        """length_s < rt60_s raises InvalidInput."""
        with pytest.raises(InvalidInput, match="length_s"):
            synth_rir(0.5, 0.4, 16000, 0)

    @pytest.mark.parametrize(("length_s", "predelay_s"), [(1e-5, 0.0), (0.00505, 0.005)])
    def test_no_tail_rejected(self, length_s: float, predelay_s: float) -> None:
        """A length with no tap after the direct path raises InvalidInput."""
        with pytest.raises(InvalidInput) as exc_info:
            synth_rir(1e-5, length_s, 16000, 0, predelay_s=predelay_s)
        assert exc_info.value.field == "length_s"

    def test_predelay_outside_first_10ms_rejected(self) -> None:
        """A 20 ms predelay raises InvalidInput."""
        with pytest.raises(InvalidInput):
            synth_rir(0.5, 0.6, 16000, 0, predelay_s=0.02)


# =============================================================================
# B. Convolution and Mixing Tests
# =============================================================================


@pytest.mark.unit
class TestConvolve:
    """Tests for RIR convolution."""

    def test_matches_direct_convolution(self, rng: np.random.Generator) -> None:
        """FFT convolution equals the defining sum, truncated to the source."""
        signal = rng.standard_normal(3000)
        rir = synth_rir(0.2, 0.25, 16000, 4)
        out = convolve(Waveform(signal), rir)
        expected = direct_convolution(signal, rir.taps)[:3000]
        assert len(out) == 3000
        np.testing.assert_allclose(out.samples, expected, atol=1e-9)

    def test_rate_mismatch_rejected(self) -> None:
        """Signal and RIR at different rates raise InvalidInput."""
        rir = RoomImpulseResponse(np.ones(1), 8000, 0.0)
        with pytest.raises(InvalidInput, match="sample rates"):
            convolve(Waveform(np.ones(10), 16000), rir)


@pytest.mark.unit
class TestMixAtSnr:
    """Tests for SNR-controlled noise mixing."""

    @pytest.mark.parametrize("snr_db", [-5.0, 0.0, 10.0, 30.0])
    def test_measured_snr_is_exact(self, rng: np.random.Generator, snr_db: float) -> None:
        """The energy SNR of the mixture equals the request."""
        x = Waveform(rng.standard_normal(4000))
        noisy = mix_at_snr(x, Waveform(rng.standard_normal(5000)), snr_db)
        assert measured_snr_db(x, noisy) == pytest.approx(snr_db, abs=1e-9)

    def test_infinite_snr_returns_copy(self, rng: np.random.Generator) -> None:
        """snr_db = +inf leaves the signal untouched."""
        x = Waveform(rng.standard_normal(100))
        out = mix_at_snr(x, Waveform(np.ones(100)), math.inf)
        np.testing.assert_array_equal(out.samples, x.samples)

    def test_short_noise_rejected(self) -> None:
        """Noise shorter than the signal raises InvalidInput."""
        with pytest.raises(InvalidInput):
            mix_at_snr(Waveform(np.ones(10)), Waveform(np.ones(5)), 10.0)

    def test_silent_signal_rejected(self) -> None:
        """A silent signal has no defined SNR."""
        with pytest.raises(InvalidInput, match="silent signal"):
            mix_at_snr(Waveform(np.zeros(10)), Waveform(np.ones(10)), 10.0)


# =============================================================================
# C. make_example() Tests
# =============================================================================


@pytest.mark.unit
class TestMakeExample:
    """Tests for mixture rendering."""

    def test_deterministic(self, clean_wave: Waveform) -> None:
        """Equal inputs give bit-identical mixtures."""
        spec = MixtureSpec(rt60_s=0.4, snr_db=15.0, noise_kind="pink", seed=7)
        a = make_example(clean_wave, spec)
        b = make_example(clean_wave, spec)
        np.testing.assert_array_equal(a.noisy_y.samples, b.noisy_y.samples)
        np.testing.assert_array_equal(a.rir.taps, b.rir.taps)

    def test_lengths_match_clean(self, mixture) -> None:
        """Reverberant and noisy signals keep the clean length."""
        assert len(mixture.reverberant_x) == len(mixture.clean)
        assert len(mixture.noisy_y) == len(mixture.clean)

    def test_snr_against_reverberant(self, mixture) -> None:
        """Noise is scaled against the reverberant signal."""
        assert measured_snr_db(mixture.reverberant_x, mixture.noisy_y) == pytest.approx(20.0)

    def test_anechoic_noiseless_is_identity(self, clean_wave: Waveform) -> None:
        """rt60 0 and snr +inf reproduce the clean signal."""
        out = make_example(clean_wave, MixtureSpec(rt60_s=0.0, snr_db=math.inf))
        np.testing.assert_allclose(out.noisy_y.samples, clean_wave.samples, atol=1e-12)

    def test_recorded_noise_file(self, clean_wave: Waveform, tmp_path: Path) -> None:
        """Recorded noise is looped from the file."""
        path = write_wav(tmp_path / "noise.wav", Waveform(np.random.default_rng(0).standard_normal(4000)))
        spec = MixtureSpec(rt60_s=0.3, snr_db=10.0, noise_kind="recorded-file", noise_path=str(path))
        out = make_example(clean_wave, spec)
        assert measured_snr_db(out.reverberant_x, out.noisy_y) == pytest.approx(10.0, abs=1e-6)

    def test_recorded_noise_requires_path(self, clean_wave: Waveform) -> None:
        """noise_kind recorded-file without noise_path raises InvalidInput."""
        with pytest.raises(InvalidInput, match="noise_path"):
            make_example(clean_wave, MixtureSpec(rt60_s=0.3, noise_kind="recorded-file"))

    @pytest.mark.parametrize("rt60_s", [0.05, 2.0, math.nan])
    def test_rt60_out_of_range_rejected(self, rt60_s: float) -> None:
        """RT60 outside [0.1, 1.5] (other than 0) is rejected."""
        with pytest.raises(InvalidInput):
            MixtureSpec(rt60_s=rt60_s)

    @pytest.mark.parametrize("distance_m", [3.43, 4.0, -0.1])
    def test_distance_beyond_predelay_window_rejected(self, distance_m: float) -> None:
        """Distances whose direct path falls outside the first 10 ms are rejected up front."""
        with pytest.raises(InvalidInput) as exc_info:
            MixtureSpec(rt60_s=0.5, source_distance_m=distance_m)
        assert exc_info.value.field == "source_distance_m"

    def test_far_source_inside_window_renders(self, clean_wave: Waveform) -> None:
        """A 3.4 m source renders with its direct path at the travel-time sample."""
        spec = MixtureSpec(rt60_s=0.5, source_distance_m=3.4)
        out = make_example(clean_wave, spec)
        assert out.rir.taps[int(round(spec.predelay_s * 16000))] == 1.0
        assert len(out.noisy_y) == len(clean_wave)

    def test_unknown_noise_kind_rejected(self) -> None:
        """Unknown noise kinds are rejected."""
        with pytest.raises(InvalidInput, match="noise_kind"):
            MixtureSpec(rt60_s=0.3, noise_kind="brown")


# =============================================================================
# D. Source Generator Tests
# =============================================================================


@pytest.mark.unit
class TestSources:
    """Tests for deterministic clean sources and noise."""

    def test_pseudo_speech_deterministic(self) -> None:
        """The same seed gives the same signal."""
        a = pseudo_speech(0.5, seed=1)
        b = pseudo_speech(0.5, seed=1)
        np.testing.assert_array_equal(a.samples, b.samples)

    def test_pseudo_speech_peak(self) -> None:
        """The peak amplitude equals the requested amplitude."""
        wave = pseudo_speech(1.0, seed=2, amplitude=0.4)
        assert float(np.max(np.abs(wave.samples))) == pytest.approx(0.4)
        assert len(wave) == 16000

    def test_chirp_peak(self) -> None:
        """Chirps are normalized to their amplitude."""
        assert float(np.max(np.abs(chirp(0.5).samples))) == pytest.approx(0.5)

    def test_noise_unit_variance(self) -> None:
        """White and pink noise have unit variance."""
        assert float(np.std(pink_noise(20000, 0))) == pytest.approx(1.0)
        assert float(np.std(white_noise(20000, 0))) == pytest.approx(1.0, abs=0.03)

    def test_zero_duration_rejected(self) -> None:
        """A duration that yields no samples is rejected."""
        with pytest.raises(InvalidInput):
            pseudo_speech(0.0, seed=0)
