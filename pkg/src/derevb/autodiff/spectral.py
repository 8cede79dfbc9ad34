"""Differentiable inverse STFT.

istft_layer applies the same weighted overlap-add synthesis as derevb.stft.istft
to real/imaginary planes held in a Tensor, so a time-domain loss can sit on top
of a spectral network. Synthesis is linear in the RI planes; the backward pass
is its adjoint: frame the incoming gradient, window it, and take the adjoint of
the one-sided inverse DFT, which is a scaled forward rfft.
"""

from __future__ import annotations

import logging

import numpy as np

from derevb.autodiff.tensor import Tensor
from derevb.errors import ShapeError
from derevb.stft import StftConfig, frame_signal, overlap_add, synthesis_gain

logger = logging.getLogger(__name__)


def _irfft_adjoint_scale(cfg: StftConfig) -> np.ndarray:
    # interior bins appear twice in the real inverse transform
    scale = np.full(cfg.n_bins, 2.0 / cfg.frame_len)
    scale[0] = 1.0 / cfg.frame_len
    if cfg.frame_len % 2 == 0:
        scale[-1] = 1.0 / cfg.frame_len
    return scale


def istft_layer(ri: Tensor, cfg: StftConfig, source_len: int) -> Tensor:
    """Resynthesize waveforms from RI planes inside the autodiff graph.

    Args:
        ri: (..., L, K, 2) real and imaginary planes, K = cfg.n_bins.
        cfg: Framing parameters the planes were produced with.
        source_len: Output sample count; synthesis is truncated or zero-padded to it.

    Returns:
        Tensor (..., source_len).

    Raises:
        ShapeError: If ri is not (..., L, K, 2).
    """
    if ri.ndim < 3 or ri.shape[-1] != 2 or ri.shape[-2] != cfg.n_bins:
        raise ShapeError(f"RI tensor must be (..., L, {cfg.n_bins}, 2), got {ri.shape}")

    n_frames = ri.shape[-3]
    window = cfg.window_coefficients()
    gain = synthesis_gain(cfg, n_frames)
    total = gain.shape[0]
    keep = min(source_len, total)
    dtype = ri.data.dtype

    spectrum = ri.data[..., 0] + 1j * ri.data[..., 1]
    frames = np.fft.irfft(spectrum, n=cfg.frame_len, axis=-1) * window
    signal = overlap_add(frames, cfg.hop_len) * gain
    out = np.zeros(ri.shape[:-3] + (source_len,), dtype=dtype)
    out[..., :keep] = signal[..., :keep]

    scale = _irfft_adjoint_scale(cfg)

    def _backward(g: np.ndarray) -> tuple[np.ndarray]:
        padded = np.zeros(g.shape[:-1] + (total,), dtype=np.float64)
        padded[..., :keep] = g[..., :keep]
        h = frame_signal(padded * gain, n_frames, cfg) * window
        adjoint = np.fft.rfft(h, axis=-1) * scale
        grad = np.stack([adjoint.real, adjoint.imag], axis=-1)
        grad[..., 0, 1] = 0.0
        if cfg.frame_len % 2 == 0:
            grad[..., -1, 1] = 0.0
        return (grad.astype(dtype),)

    return Tensor._from_op(out, (ri,), _backward, "istft")
