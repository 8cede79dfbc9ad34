"""Brute-force reference implementations for numerical tests.

Each oracle recomputes a quantity the slow, obvious way (explicit loops, dense
DFT matrices, direct linear solves) so the vectorized library code can be
checked against something that shares none of its shortcuts.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import solve_toeplitz


def dft_frames(samples: np.ndarray, frame_len: int, hop: int, window: np.ndarray) -> np.ndarray:
    """One-sided DFT of every full frame (the signal is zero-padded to one frame if short)."""
    if len(samples) < frame_len:
        samples = np.concatenate([samples, np.zeros(frame_len - len(samples))])
    n_frames = 1 + math.ceil(max(0, len(samples) - frame_len) / hop)
    padded = np.concatenate([samples, np.zeros((n_frames - 1) * hop + frame_len - len(samples))])
    n = np.arange(frame_len)
    k = np.arange(frame_len // 2 + 1)
    basis = np.exp(-2j * np.pi * np.outer(k, n) / frame_len)
    out = np.empty((n_frames, k.shape[0]), dtype=complex)
    for index in range(n_frames):
        segment = padded[index * hop : index * hop + frame_len] * window
        out[index] = basis @ segment
    return out


def direct_convolution(signal: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Full linear convolution by the defining double sum."""
    out = np.zeros(len(signal) + len(taps) - 1)
    for i, tap in enumerate(taps):
        out[i : i + len(signal)] += tap * signal
    return out


def si_sdr_lstsq(ref: np.ndarray, est: np.ndarray) -> float:
    """SI-SDR with the optimal scale found by least squares."""
    alpha = np.linalg.lstsq(ref[:, None], est, rcond=None)[0][0]
    target = alpha * ref
    return 10.0 * math.log10(np.sum(target**2) / np.sum((est - target) ** 2))


def analysis_frames(samples: np.ndarray, frame_len: int, hop: int) -> list[np.ndarray]:
    """Symmetric-Hann windowed full frames."""
    if len(samples) < frame_len:
        samples = np.concatenate([samples, np.zeros(frame_len - len(samples))])
    window = np.hanning(frame_len)
    starts = range(0, len(samples) - frame_len + 1, hop)
    return [samples[s : s + frame_len] * window for s in starts]


def gated_indices(ref_frames: list[np.ndarray], gate_db: float) -> list[int]:
    energies = [float(np.sum(f**2)) for f in ref_frames]
    peak = max(energies)
    return [
        i for i, e in enumerate(energies) if e > 0 and 10.0 * math.log10(e / peak) >= gate_db
    ]


def autocorrelation(frame: np.ndarray, order: int) -> np.ndarray:
    full = np.correlate(frame, frame, mode="full")
    centre = len(frame) - 1
    return full[centre : centre + order + 1]


def lpc_solve(frame: np.ndarray, order: int) -> np.ndarray:
    """[1, a_1..a_p] from the normal equations R a = -r."""
    r = autocorrelation(frame, order)
    return np.concatenate([[1.0], solve_toeplitz(r[:order], -r[1 : order + 1])])


def lpc_cepstrum_fft(a: np.ndarray, n_coeffs: int, n_fft: int = 8192) -> np.ndarray:
    """c_1..c_n of 1/A(z) from the inverse DFT of -log A(e^jw)."""
    spectrum = np.fft.fft(a, n_fft)
    log_a = np.log(np.abs(spectrum)) + 1j * np.unwrap(np.angle(spectrum))
    cepstrum = np.fft.ifft(-log_a).real
    return cepstrum[1 : n_coeffs + 1]


def cepstral_distance_oracle(
    ref: np.ndarray, est: np.ndarray, frame_len: int = 512, hop: int = 256, order: int = 16,
    gate_db: float = -40.0, cd_max: float = 10.0,
) -> float:
    ref_frames = analysis_frames(ref, frame_len, hop)
    est_frames = analysis_frames(est, frame_len, hop)
    values = []
    for i in gated_indices(ref_frames, gate_db):
        c_ref = lpc_cepstrum_fft(lpc_solve(ref_frames[i], order), order)
        c_est = lpc_cepstrum_fft(lpc_solve(est_frames[i], order), order)
        distance = 10.0 / math.log(10.0) * math.sqrt(2.0 * np.sum((c_ref - c_est) ** 2))
        values.append(min(max(distance, 0.0), cd_max))
    return float(np.mean(values))


def llr_oracle(
    ref: np.ndarray, est: np.ndarray, frame_len: int = 512, hop: int = 256, order: int = 16,
    gate_db: float = -40.0, keep_fraction: float = 0.95,
) -> float:
    ref_frames = analysis_frames(ref, frame_len, hop)
    est_frames = analysis_frames(est, frame_len, hop)
    values = []
    for i in gated_indices(ref_frames, gate_db):
        r = autocorrelation(ref_frames[i], order)
        matrix = np.array([[r[abs(row - col)] for col in range(order + 1)] for row in range(order + 1)])
        a_ref = lpc_solve(ref_frames[i], order)
        a_est = lpc_solve(est_frames[i], order)
        values.append(max(math.log((a_est @ matrix @ a_est) / (a_ref @ matrix @ a_ref)), 0.0))
    values.sort()
    keep = max(1, int(round(keep_fraction * len(values))))
    return float(np.mean(values[:keep]))


def mel_bank_oracle(n_bands: int, frame_len: int, fs: int) -> np.ndarray:
    def to_mel(hz: float) -> float:
        return 2595.0 * math.log10(1.0 + hz / 700.0)

    def to_hz(mel: float) -> float:
        return 700.0 * (10.0 ** (mel / 2595.0) - 1.0)

    top = to_mel(fs / 2)
    edges = [to_hz(top * i / (n_bands + 1)) for i in range(n_bands + 2)]
    n_bins = frame_len // 2 + 1
    bank = np.zeros((n_bands, n_bins))
    for band in range(n_bands):
        low, centre, high = edges[band], edges[band + 1], edges[band + 2]
        for b in range(n_bins):
            hz = b * fs / frame_len
            if low < hz <= centre:
                bank[band, b] = (hz - low) / (centre - low)
            elif centre < hz < high:
                bank[band, b] = (high - hz) / (high - centre)
    return bank


def fw_seg_snr_oracle(
    ref: np.ndarray, est: np.ndarray, fs: int, frame_len: int = 512, hop: int = 256,
    n_bands: int = 25, gamma: float = 0.2, low: float = -10.0, high: float = 35.0,
    gate_db: float = -40.0,
) -> float:
    ref_frames = analysis_frames(ref, frame_len, hop)
    est_frames = analysis_frames(est, frame_len, hop)
    bank = mel_bank_oracle(n_bands, frame_len, fs)
    n = np.arange(frame_len)
    basis = np.exp(-2j * np.pi * np.outer(np.arange(frame_len // 2 + 1), n) / frame_len)
    values = []
    for i in gated_indices(ref_frames, gate_db):
        band_ref = bank @ np.abs(basis @ ref_frames[i])
        band_est = bank @ np.abs(basis @ est_frames[i])
        numerator = 0.0
        for x, y in zip(band_ref, band_est):
            numerator += x**gamma * 10.0 * math.log10(x**2 / (x - y) ** 2)
        value = numerator / np.sum(band_ref**gamma)
        values.append(min(max(value, low), high))
    return float(np.mean(values))


def mse_brute_force(a: np.ndarray, b: np.ndarray) -> float:
    total = 0.0
    for x, y in zip(a.reshape(-1), b.reshape(-1)):
        total += (float(x) - float(y)) ** 2
    return total / a.size
