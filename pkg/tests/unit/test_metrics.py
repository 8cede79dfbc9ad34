"""Tests for metrics module.

Test Coverage:
    - si_sdr(): hand-computed cases, caps, least-squares oracle, scale invariance
    - frames() / energy_gate(): framing and gating
    - lpc() / lpc_cepstrum(): normal-equation and FFT-cepstrum oracles
    - cepstral_distance(), llr(), fw_seg_snr(): brute-force oracles on random pairs
    - evaluate_pair(): report assembly, identity scores, errors
    - MetricsReport.mean(): averaging
"""

import math

import numpy as np
import pytest

from derevb.audio import Waveform
from derevb.errors import InvalidInput
from derevb.metrics import (
    LpcFrameConfig,
    MetricsReport,
    cepstral_distance,
    energy_gate,
    evaluate_pair,
    frames,
    fw_seg_snr,
    llr,
    lpc,
    lpc_cepstrum,
    mel_filterbank,
    si_sdr,
)
from tests.helpers.oracles import (
    cepstral_distance_oracle,
    fw_seg_snr_oracle,
    llr_oracle,
    lpc_cepstrum_fft,
    lpc_solve,
    mel_bank_oracle,
    si_sdr_lstsq,
)


def _random_pairs(count: int, n_samples: int = 4000):
    rng = np.random.default_rng(2024)
    for _ in range(count):
        ref = rng.standard_normal(n_samples)
        est = ref + rng.uniform(0.1, 1.0) * rng.standard_normal(n_samples)
        yield ref, est


# =============================================================================
# A. SI-SDR Tests
# =============================================================================


@pytest.mark.unit
class TestSiSdr:
    """Tests for scale-invariant SDR."""

    def test_hand_computed_value(self) -> None:
        """ref [1, 0], est [1, 0.1] gives exactly 20 dB."""
        assert si_sdr(Waveform([1.0, 0.0]), Waveform([1.0, 0.1])) == pytest.approx(20.0)

    def test_scaled_copy_hits_cap(self) -> None:
        """A scaled copy of the reference scores +100 dB."""
        ref = Waveform([0.3, -0.2, 0.5])
        assert si_sdr(ref, ref.with_samples(2.0 * ref.samples)) == 100.0

    def test_orthogonal_estimate_hits_floor(self) -> None:
        """An orthogonal estimate scores -100 dB."""
        assert si_sdr(Waveform([1.0, 0.0]), Waveform([0.0, 1.0])) == -100.0

    def test_matches_least_squares(self) -> None:
        """Values agree with the least-squares projection."""
        for ref, est in _random_pairs(20, 2000):
            assert si_sdr(Waveform(ref), Waveform(est)) == pytest.approx(
                si_sdr_lstsq(ref, est), abs=1e-9
            )

    def test_scale_invariant(self, rng: np.random.Generator) -> None:
        """Scaling the estimate does not change the score."""
        ref = Waveform(rng.standard_normal(1000))
        est = Waveform(ref.samples + rng.standard_normal(1000))
        scaled = est.with_samples(-3.5 * est.samples)
        assert si_sdr(ref, scaled) == pytest.approx(si_sdr(ref, est), abs=1e-9)

    def test_zero_reference_rejected(self) -> None:
        """An all-zero reference raises InvalidInput."""
        with pytest.raises(InvalidInput, match="all zeros"):
            si_sdr(Waveform([0.0, 0.0]), Waveform([1.0, 0.0]))

    def test_length_mismatch_rejected(self) -> None:
        """Different lengths raise InvalidInput."""
        with pytest.raises(InvalidInput, match="lengths differ"):
            si_sdr(Waveform([1.0, 0.0]), Waveform([1.0]))


# =============================================================================
# B. Framing and LPC Tests
# =============================================================================


@pytest.mark.unit
class TestFraming:
    """Tests for analysis frames and the energy gate."""

    def test_only_full_frames(self) -> None:
        """1000 samples give two full 512/256 frames."""
        assert frames(Waveform(np.ones(1000)), LpcFrameConfig()).shape == (2, 512)

    def test_short_signal_padded(self) -> None:
        """A 100-sample signal gives one padded frame."""
        out = frames(Waveform(np.ones(100)), LpcFrameConfig())
        assert out.shape == (1, 512)
        assert np.all(out[0, 100:] == 0.0)

    def test_window_is_symmetric_hann(self) -> None:
        """Frames of ones equal np.hanning."""
        out = frames(Waveform(np.ones(512)), LpcFrameConfig())
        np.testing.assert_allclose(out[0], np.hanning(512), atol=1e-15)

    def test_gate_drops_quiet_and_silent_frames(self) -> None:
        """Frames 60 dB down and all-zero frames fail the gate."""
        energies = np.array([[1.0], [0.02], [1e-3], [0.0]])
        np.testing.assert_array_equal(energy_gate(energies, -40.0), [True, True, False, False])


@pytest.mark.unit
class TestLpc:
    """Tests for the Levinson recursion and the cepstral recursion."""

    def test_matches_normal_equations(self, rng: np.random.Generator) -> None:
        """Levinson coefficients solve the Toeplitz normal equations."""
        frame = rng.standard_normal(512) * np.hanning(512)
        fit = lpc(frame, 16)
        assert fit.stable
        np.testing.assert_allclose(fit.a, lpc_solve(frame, 16), atol=1e-10)

    def test_cepstrum_matches_fft(self, rng: np.random.Generator) -> None:
        """Recursive cepstrum equals the FFT log-spectrum cepstrum."""
        frame = rng.standard_normal(512) * np.hanning(512)
        a = lpc(frame, 16).a
        np.testing.assert_allclose(lpc_cepstrum(a, 16), lpc_cepstrum_fft(a, 16), atol=1e-9)

    def test_silent_frame_is_unstable(self) -> None:
        """A zero frame has no fit."""
        assert not lpc(np.zeros(512), 16).stable

    def test_filterbank_matches_oracle(self) -> None:
        """Mel triangles agree with a per-bin evaluation."""
        np.testing.assert_allclose(
            mel_filterbank(25, 512, 16000), mel_bank_oracle(25, 512, 16000), atol=1e-12
        )


# =============================================================================
# C. Frame-Based Measure Tests
# =============================================================================


@pytest.mark.unit
class TestFrameMeasures:
    """Oracle comparisons for CD, LLR and fwSegSNR on 20 random pairs."""

    def test_cepstral_distance_matches_oracle(self) -> None:
        """CD agrees with the FFT-cepstrum oracle."""
        for ref, est in _random_pairs(20):
            value = cepstral_distance(Waveform(ref), Waveform(est))
            assert value == pytest.approx(cepstral_distance_oracle(ref, est), abs=1e-8)

    def test_llr_matches_oracle(self) -> None:
        """LLR agrees with the explicit quadratic-form oracle."""
        for ref, est in _random_pairs(20):
            assert llr(Waveform(ref), Waveform(est)) == pytest.approx(llr_oracle(ref, est), abs=1e-9)

    def test_fw_seg_snr_matches_oracle(self) -> None:
        """fwSegSNR agrees with the dense-DFT band oracle."""
        for ref, est in _random_pairs(20):
            value = fw_seg_snr(Waveform(ref), Waveform(est))
            assert value == pytest.approx(fw_seg_snr_oracle(ref, est, 16000), abs=1e-9)

    def test_identical_signals(self, clean_wave: Waveform) -> None:
        """Identity scores: CD 0, LLR 0, fwSegSNR at its ceiling."""
        assert cepstral_distance(clean_wave, clean_wave) == pytest.approx(0.0, abs=1e-9)
        assert llr(clean_wave, clean_wave) == pytest.approx(0.0, abs=1e-9)
        assert fw_seg_snr(clean_wave, clean_wave) == 35.0

    def test_silent_reference_rejected(self) -> None:
        """No frame passes the gate of a silent reference."""
        with pytest.raises(InvalidInput, match="energy gate"):
            cepstral_distance(Waveform(np.zeros(2000)), Waveform(np.ones(2000)))


# =============================================================================
# D. evaluate_pair() Tests
# =============================================================================


@pytest.mark.unit
class TestEvaluatePair:
    """Tests for the combined report."""

    def test_report_fields_agree_with_individual_measures(self, mixture) -> None:
        """Each column equals its standalone function."""
        ref, est = mixture.clean, mixture.noisy_y
        report = evaluate_pair(ref, est)
        assert report.si_sdr_db == pytest.approx(si_sdr(ref, est))
        assert report.cd == pytest.approx(cepstral_distance(ref, est))
        assert report.llr == pytest.approx(llr(ref, est))
        assert report.fw_snr_seg_db == pytest.approx(fw_seg_snr(ref, est))
        assert report.n_frames_scored > 0

    def test_reverberation_degrades_scores(self, mixture) -> None:
        """The noisy mixture scores worse than the clean signal."""
        report = evaluate_pair(mixture.clean, mixture.noisy_y)
        assert report.cd > 0.0
        assert report.si_sdr_db < 100.0

    def test_truncates_to_shorter(self, clean_wave: Waveform) -> None:
        """A longer estimate is truncated before scoring."""
        longer = clean_wave.with_samples(np.concatenate([clean_wave.samples, np.ones(300)]))
        assert evaluate_pair(clean_wave, longer).si_sdr_db == 100.0

    def test_mean_of_reports(self) -> None:
        """mean averages scores and sums frame counts."""
        a = MetricsReport(10.0, 1.0, 0.2, 5.0, 10, 1)
        b = MetricsReport(20.0, 3.0, 0.4, 7.0, 20, 0)
        mean = MetricsReport.mean([a, b])
        assert (mean.si_sdr_db, mean.cd, mean.n_frames_scored, mean.n_frames_skipped) == (15.0, 2.0, 30, 1)
        assert mean.llr == pytest.approx(0.3)

    def test_mean_of_nothing_rejected(self) -> None:
        """An empty list cannot be averaged."""
        with pytest.raises(InvalidInput):
            MetricsReport.mean([])

    def test_invalid_lpc_order_rejected(self) -> None:
        """lpc_order must be below frame_len."""
        with pytest.raises(InvalidInput, match="lpc_order"):
            LpcFrameConfig(frame_len=16, lpc_order=16)

    def test_cd_is_gain_blind(self, clean_wave: Waveform) -> None:
        """Scaling the estimate leaves CD unchanged."""
        est = clean_wave.with_samples(0.25 * clean_wave.samples)
        assert cepstral_distance(clean_wave, est) == pytest.approx(0.0, abs=1e-9)
        assert math.isfinite(llr(clean_wave, est))
