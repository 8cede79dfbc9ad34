"""Training objectives.

loss_s2s is the mean squared log-magnitude error of the magnitude network.
loss_ri2ri resynthesizes the complex network's estimate with the differentiable
inverse STFT and returns the negative SI-SDR against the clean waveform, so the
complex network is judged in the time domain where phase errors show.
"""

from __future__ import annotations

import logging
import math
from typing import Union

import numpy as np

from derevb.audio import Waveform
from derevb.autodiff import functional as F
from derevb.autodiff.spectral import istft_layer
from derevb.autodiff.tensor import Tensor, as_tensor
from derevb.errors import InvalidInput, ShapeError
from derevb.stft import StftConfig

logger = logging.getLogger(__name__)

# residual floor relative to the estimate energy; keeps the loss scale-free
SI_SDR_EPS = 1e-10
_DB = 10.0 / math.log(10.0)

TargetLike = Union[Tensor, np.ndarray]


def loss_s2s(est_log_mag: Tensor, clean_log_mag: TargetLike) -> Tensor:
    """Mean over every cell (and batch item) of the squared log-magnitude error.

    Raises:
        ShapeError: If the shapes differ.
    """
    target = as_tensor(clean_log_mag, like=est_log_mag)
    if est_log_mag.shape != target.shape:
        raise ShapeError(f"estimate {est_log_mag.shape} and target {target.shape} differ")
    return F.mean(F.square(est_log_mag - target))


def loss_ri_mse(est_ri: Tensor, clean_ri: TargetLike) -> Tensor:
    """Mean squared error between estimated and clean RI planes."""
    target = as_tensor(clean_ri, like=est_ri)
    if est_ri.shape != target.shape:
        raise ShapeError(f"estimate {est_ri.shape} and target {target.shape} differ")
    return F.mean(F.square(est_ri - target))


def _clean_batch(clean_wave: Union[Waveform, np.ndarray], batched: bool) -> np.ndarray:
    samples = clean_wave.samples if isinstance(clean_wave, Waveform) else np.asarray(clean_wave)
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim == 1:
        samples = samples[None]
    if samples.ndim != 2 or (not batched and samples.shape[0] != 1):
        raise ShapeError(f"clean waveform batch has shape {samples.shape}")
    energy = np.sum(samples**2, axis=-1)
    if np.any(energy == 0.0):
        raise InvalidInput("clean waveform is all zeros; SI-SDR is undefined")
    return samples


def negative_si_sdr(est_wave: Tensor, clean: np.ndarray) -> Tensor:
    """Batch mean of -SI-SDR (dB) for (N, S) estimates against (N, S) references."""
    if est_wave.shape != clean.shape:
        raise ShapeError(f"estimate {est_wave.shape} and reference {clean.shape} differ")
    reference = Tensor(clean, dtype=est_wave.dtype)
    ref_energy = Tensor(np.sum(clean**2, axis=-1, keepdims=True), dtype=est_wave.dtype)

    alpha = F.sum(est_wave * reference, axis=-1, keepdims=True) / ref_energy
    target = alpha * reference
    residual = est_wave - target
    est_energy = F.sum(F.square(est_wave), axis=-1)
    ratio = F.sum(F.square(target), axis=-1) / (
        F.sum(F.square(residual), axis=-1) + SI_SDR_EPS * est_energy
    )
    return -F.mean(F.log(ratio)) * _DB


def loss_ri2ri(
    est_ri: Tensor, clean_wave: Union[Waveform, np.ndarray], stft_cfg: StftConfig
) -> Tensor:
    """Negative SI-SDR of the resynthesized estimate, averaged over the batch.

    Args:
        est_ri: (L, K, 2) or (N, L, K, 2) real/imaginary planes.
        clean_wave: Reference waveform(s), (S,) or (N, S); S is the synthesis length.
        stft_cfg: Framing the planes belong to.

    Raises:
        InvalidInput: If a reference is all zeros.
        ShapeError: If shapes are inconsistent.
    """
    batched = est_ri.ndim == 4
    clean = _clean_batch(clean_wave, batched)
    ri = est_ri if batched else F.reshape(est_ri, (1,) + est_ri.shape)
    if ri.shape[0] != clean.shape[0]:
        raise ShapeError(f"{ri.shape[0]} estimates for {clean.shape[0]} references")
    est_wave = istft_layer(ri, stft_cfg, clean.shape[-1])
    return negative_si_sdr(est_wave, clean)


def model_output_to_ri(out: Tensor, n_bins: int) -> Tensor:
    """(N, 2, F, L) network output -> (N, L, n_bins, 2) with zero bins above F."""
    if out.ndim != 4 or out.shape[1] != 2:
        raise ShapeError(f"expected (N, 2, F, L) planes, got {out.shape}")
    planes = F.transpose(out, (0, 3, 2, 1))
    missing = n_bins - out.shape[2]
    if missing < 0:
        raise ShapeError(f"{out.shape[2]} bins do not fit a {n_bins}-bin spectrum")
    return F.pad(planes, ((0, 0), (0, 0), (0, missing), (0, 0))) if missing else planes
