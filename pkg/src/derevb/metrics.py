"""Objective speech-quality measures.

SI-SDR is computed on whole utterances. The frame-based measures (cepstral
distance, log-likelihood ratio, frequency-weighted segmental SNR) window the
reference and estimate identically and score only frames whose reference energy
lies within energy_gate_db of the loudest frame, so silences never reach an
LPC fit.

Functions:
    si_sdr: Scale-invariant signal-to-distortion ratio in dB
    cepstral_distance: Mean LPC-cepstrum distance
    llr: Trimmed mean log-likelihood ratio
    fw_seg_snr: Frequency-weighted segmental SNR
    evaluate_pair: All of the above as a MetricsReport
"""

from __future__ import annotations

import logging
import math
from typing import Any, Optional

import attr
import numpy as np
from scipy.linalg import toeplitz
from scipy.signal import get_window

from derevb.audio import Waveform
from derevb.errors import InvalidInput

logger = logging.getLogger(__name__)

SI_SDR_CAP_DB = 100.0


def _lpc_order_valid(inst: LpcFrameConfig, _attribute: Any, value: int) -> None:
    if not 0 < value < inst.frame_len:
        raise InvalidInput(
            f"lpc_order must be in (0, frame_len), got {value}", field="lpc_order"
        )


def _finite(_inst: Any, attribute: Any, value: float) -> None:
    if not math.isfinite(value):
        raise InvalidInput(f"{attribute.name} must be finite", field=attribute.name)


@attr.frozen
class LpcFrameConfig:
    """Framing and scoring constants of the frame-based measures.

    Attributes:
        frame_len: Analysis frame length in samples.
        hop: Frame advance in samples.
        lpc_order: Autocorrelation-method LPC order (and cepstral coefficients).
        energy_gate_db: Frames quieter than the loudest reference frame by more
            than this are not scored.
        window: scipy window name applied to every frame.
        cd_max: Upper clip of the per-frame cepstral distance.
        llr_keep_fraction: Fraction of the smallest frame LLRs averaged.
        fw_bands: Number of mel-spaced triangular bands.
        fw_weight_exponent: Band weight is the reference band magnitude to this power.
        fw_snr_min_db / fw_snr_max_db: Clip range of the per-frame fwSNR.
    """

    frame_len: int = 512
    hop: int = 256
    lpc_order: int = attr.field(default=16, validator=_lpc_order_valid)
    energy_gate_db: float = attr.field(default=-40.0, validator=_finite)
    window: str = "hann"
    cd_max: float = 10.0
    llr_keep_fraction: float = 0.95
    fw_bands: int = 25
    fw_weight_exponent: float = 0.2
    fw_snr_min_db: float = -10.0
    fw_snr_max_db: float = 35.0


@attr.frozen
class MetricsReport:
    """Scores of one estimate against its reference."""

    si_sdr_db: float
    cd: float
    llr: float
    fw_snr_seg_db: float
    n_frames_scored: int
    n_frames_skipped: int = 0

    @classmethod
    def mean(cls, reports: list[MetricsReport]) -> MetricsReport:
        """Average the metric columns; frame counts are summed."""
        if not reports:
            raise InvalidInput("cannot average an empty list of reports")
        return cls(
            si_sdr_db=float(np.mean([r.si_sdr_db for r in reports])),
            cd=float(np.mean([r.cd for r in reports])),
            llr=float(np.mean([r.llr for r in reports])),
            fw_snr_seg_db=float(np.mean([r.fw_snr_seg_db for r in reports])),
            n_frames_scored=sum(r.n_frames_scored for r in reports),
            n_frames_skipped=sum(r.n_frames_skipped for r in reports),
        )


@attr.frozen(eq=False)
class LpcFit:
    """Autocorrelation-method LPC fit of one frame.

    Attributes:
        a: Polynomial [1, a_1, ..., a_p] of A(z) = 1 + sum a_k z^-k.
        r: Autocorrelation lags 0..p.
        stable: False when the Levinson recursion hit |k| >= 1 or zero energy.
    """

    a: np.ndarray
    r: np.ndarray
    stable: bool


def _check_pair(ref: Waveform, est: Waveform) -> None:
    if len(ref) != len(est):
        raise InvalidInput(f"lengths differ: reference {len(ref)}, estimate {len(est)}")
    if len(ref) == 0:
        raise InvalidInput("signals are empty")
    if ref.sample_rate_hz != est.sample_rate_hz:
        raise InvalidInput(
            f"sample rates differ: {ref.sample_rate_hz} Hz vs {est.sample_rate_hz} Hz"
        )


def si_sdr(ref: Waveform, est: Waveform) -> float:
    """Scale-invariant SDR of est against ref, in dB.

    The estimate's projection alpha * ref is the target; the result is capped at
    +100 dB for a numerically zero residual and floored at -100 dB when the
    estimate is orthogonal to the reference.

    Raises:
        InvalidInput: If lengths differ or ref is all zeros.
    """
    _check_pair(ref, est)
    ref_energy = float(np.dot(ref.samples, ref.samples))
    if ref_energy == 0.0:
        raise InvalidInput("reference signal is all zeros")

    alpha = float(np.dot(est.samples, ref.samples)) / ref_energy
    if alpha == 0.0:
        return -SI_SDR_CAP_DB
    target = alpha * ref.samples
    target_energy = float(np.dot(target, target))
    residual = target - est.samples
    residual_energy = float(np.dot(residual, residual))
    if residual_energy <= target_energy * 10.0 ** (-SI_SDR_CAP_DB / 10.0):
        return SI_SDR_CAP_DB
    value = 10.0 * math.log10(target_energy / residual_energy)
    return float(np.clip(value, -SI_SDR_CAP_DB, SI_SDR_CAP_DB))


def frames(wave: Waveform, cfg: LpcFrameConfig) -> np.ndarray:
    """Windowed analysis frames, shape (n_frames, frame_len).

    Only full frames are used; a signal shorter than one frame is zero-padded
    into a single frame.
    """
    samples = wave.samples
    if len(samples) < cfg.frame_len:
        samples = np.pad(samples, (0, cfg.frame_len - len(samples)))
    n_frames = 1 + (len(samples) - cfg.frame_len) // cfg.hop
    index = np.arange(cfg.frame_len)[None, :] + cfg.hop * np.arange(n_frames)[:, None]
    window = get_window(cfg.window, cfg.frame_len, fftbins=False)
    return np.asarray(samples[index] * window)


def energy_gate(ref_frames: np.ndarray, gate_db: float) -> np.ndarray:
    """Boolean mask of frames within gate_db of the loudest, never silent ones."""
    energy = np.sum(ref_frames**2, axis=1)
    peak = float(np.max(energy))
    if peak == 0.0:
        return np.zeros(energy.shape[0], dtype=bool)
    with np.errstate(divide="ignore"):
        relative_db = 10.0 * np.log10(energy / peak)
    return (energy > 0.0) & (relative_db >= gate_db)


def lpc(frame: np.ndarray, order: int) -> LpcFit:
    """Levinson-Durbin LPC from the frame's autocorrelation lags."""
    n = frame.shape[0]
    r = np.array([np.dot(frame[: n - k], frame[k:]) for k in range(order + 1)])
    a = np.zeros(order + 1)
    a[0] = 1.0
    error = r[0]
    if error <= 0.0:
        return LpcFit(a, r, stable=False)

    for i in range(1, order + 1):
        k = -(r[i] + np.dot(a[1:i], r[i - 1 : 0 : -1])) / error
        if abs(k) >= 1.0:
            return LpcFit(a, r, stable=False)
        previous = a[1:i].copy()
        a[1:i] = previous + k * previous[::-1]
        a[i] = k
        error *= 1.0 - k * k
    return LpcFit(a, r, stable=error > 0.0)


def lpc_cepstrum(a: np.ndarray, n_coeffs: int) -> np.ndarray:
    """Cepstral coefficients c_1..c_n of the all-pole model 1 / A(z)."""
    order = a.shape[0] - 1
    c = np.zeros(n_coeffs + 1)
    for n in range(1, n_coeffs + 1):
        acc = -a[n] if n <= order else 0.0
        for k in range(max(1, n - order), n):
            acc -= (k / n) * c[k] * a[n - k]
        c[n] = acc
    return c[1:]


@attr.frozen(eq=False)
class _FramePairs:
    ref: list[LpcFit]
    est: list[LpcFit]
    ref_frames: np.ndarray
    est_frames: np.ndarray
    n_gated: int


def _gated_frames(ref: Waveform, est: Waveform, cfg: LpcFrameConfig) -> tuple[np.ndarray, np.ndarray]:
    _check_pair(ref, est)
    ref_frames = frames(ref, cfg)
    est_frames = frames(est, cfg)
    mask = energy_gate(ref_frames, cfg.energy_gate_db)
    if not np.any(mask):
        raise InvalidInput(
            f"no reference frame passes the {cfg.energy_gate_db} dB energy gate"
        )
    return ref_frames[mask], est_frames[mask]


def _lpc_pairs(ref: Waveform, est: Waveform, cfg: LpcFrameConfig) -> _FramePairs:
    ref_frames, est_frames = _gated_frames(ref, est, cfg)
    ref_fits, est_fits = [], []
    for ref_frame, est_frame in zip(ref_frames, est_frames):
        ref_fit = lpc(ref_frame, cfg.lpc_order)
        est_fit = lpc(est_frame, cfg.lpc_order)
        if ref_fit.stable and est_fit.stable:
            ref_fits.append(ref_fit)
            est_fits.append(est_fit)
    skipped = ref_frames.shape[0] - len(ref_fits)
    if skipped:
        logger.warning(f"Skipped {skipped} of {ref_frames.shape[0]} frames with unstable LPC fits")
    if not ref_fits:
        raise InvalidInput("every gated frame has an unstable LPC fit")
    return _FramePairs(ref_fits, est_fits, ref_frames, est_frames, ref_frames.shape[0])


def _cd_from_pairs(pairs: _FramePairs, cfg: LpcFrameConfig) -> float:
    values = []
    for ref_fit, est_fit in zip(pairs.ref, pairs.est):
        delta = lpc_cepstrum(ref_fit.a, cfg.lpc_order) - lpc_cepstrum(est_fit.a, cfg.lpc_order)
        distance = (10.0 / math.log(10.0)) * math.sqrt(2.0 * float(np.sum(delta**2)))
        values.append(min(max(distance, 0.0), cfg.cd_max))
    return float(np.mean(values))


def _llr_from_pairs(pairs: _FramePairs, cfg: LpcFrameConfig) -> float:
    values = []
    for ref_fit, est_fit in zip(pairs.ref, pairs.est):
        r_ref = toeplitz(ref_fit.r)
        numerator = est_fit.a @ r_ref @ est_fit.a
        denominator = ref_fit.a @ r_ref @ ref_fit.a
        values.append(max(math.log(numerator / denominator), 0.0))
    ordered = np.sort(values)
    keep = max(1, int(round(cfg.llr_keep_fraction * len(ordered))))
    return float(np.mean(ordered[:keep]))


def cepstral_distance(ref: Waveform, est: Waveform, cfg: Optional[LpcFrameConfig] = None) -> float:
    """Mean per-frame LPC-cepstrum distance (c_0 excluded, so gain-blind).

    Raises:
        InvalidInput: If lengths differ or no frame can be scored.
    """
    cfg = cfg or LpcFrameConfig()
    return _cd_from_pairs(_lpc_pairs(ref, est, cfg), cfg)


def llr(ref: Waveform, est: Waveform, cfg: Optional[LpcFrameConfig] = None) -> float:
    """Log-likelihood ratio with the reference autocorrelation matrix.

    Negative frame values are clipped to 0 and the mean is taken over the
    smallest llr_keep_fraction of frames.
    """
    cfg = cfg or LpcFrameConfig()
    return _llr_from_pairs(_lpc_pairs(ref, est, cfg), cfg)


def mel_filterbank(n_bands: int, frame_len: int, sample_rate_hz: int) -> np.ndarray:
    """Triangular mel-spaced band weights over one-sided bins: (n_bands, n_bins)."""
    n_bins = frame_len // 2 + 1
    bin_hz = np.arange(n_bins) * sample_rate_hz / frame_len
    top_mel = 2595.0 * math.log10(1.0 + (sample_rate_hz / 2) / 700.0)
    edges_hz = 700.0 * (10.0 ** (np.linspace(0.0, top_mel, n_bands + 2) / 2595.0) - 1.0)

    bank = np.zeros((n_bands, n_bins))
    for band in range(n_bands):
        low, centre, high = edges_hz[band : band + 3]
        rising = (bin_hz - low) / (centre - low)
        falling = (high - bin_hz) / (high - centre)
        bank[band] = np.clip(np.minimum(rising, falling), 0.0, None)
    return bank


def fw_snr_frame(band_ref: np.ndarray, band_est: np.ndarray, cfg: LpcFrameConfig) -> float:
    """Weighted band SNR of one frame, clipped to the configured range."""
    tiny = np.finfo(np.float64).tiny
    weights = band_ref**cfg.fw_weight_exponent
    ratio = np.maximum(band_ref**2, tiny) / np.maximum((band_ref - band_est) ** 2, tiny)
    value = float(np.sum(weights * 10.0 * np.log10(ratio)) / np.sum(weights))
    return min(max(value, cfg.fw_snr_min_db), cfg.fw_snr_max_db)


def fw_seg_snr(ref: Waveform, est: Waveform, cfg: Optional[LpcFrameConfig] = None) -> float:
    """Frequency-weighted segmental SNR in dB over gated frames."""
    cfg = cfg or LpcFrameConfig()
    ref_frames, est_frames = _gated_frames(ref, est, cfg)
    bank = mel_filterbank(cfg.fw_bands, cfg.frame_len, ref.sample_rate_hz)
    band_ref = np.abs(np.fft.rfft(ref_frames, axis=1)) @ bank.T
    band_est = np.abs(np.fft.rfft(est_frames, axis=1)) @ bank.T
    values = [fw_snr_frame(r, e, cfg) for r, e in zip(band_ref, band_est)]
    return float(np.mean(values))


def evaluate_pair(
    ref: Waveform, est: Waveform, cfg: Optional[LpcFrameConfig] = None
) -> MetricsReport:
    """Score an estimate with all four measures.

    Both signals are truncated to the shorter length first.
    """
    cfg = cfg or LpcFrameConfig()
    length = min(len(ref), len(est))
    ref, est = ref.truncate(length), est.truncate(length)

    pairs = _lpc_pairs(ref, est, cfg)
    return MetricsReport(
        si_sdr_db=si_sdr(ref, est),
        cd=_cd_from_pairs(pairs, cfg),
        llr=_llr_from_pairs(pairs, cfg),
        fw_snr_seg_db=fw_seg_snr(ref, est, cfg),
        n_frames_scored=len(pairs.ref),
        n_frames_skipped=pairs.n_gated - len(pairs.ref),
    )
