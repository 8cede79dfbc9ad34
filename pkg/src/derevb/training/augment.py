"""Training-time augmentation: time/frequency stripe masking and fixed-size crops."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from typing import Any

import attr
import numpy as np

from derevb.errors import InvalidInput

logger = logging.getLogger(__name__)

CROP_FRAMES = 256


def _non_negative(_inst: Any, attribute: Any, value: int) -> None:
    if value < 0:
        raise InvalidInput(f"{attribute.name} must be >= 0, got {value}", field=attribute.name)


@attr.frozen
class SpecAugmentConfig:
    """Stripe masking parameters.

    Widths are drawn uniformly from [min_width, max_width] and clipped to the
    plane's extent along the masked axis.
    """

    enabled: bool = True
    n_time_masks: int = attr.field(default=2, validator=_non_negative)
    n_freq_masks: int = attr.field(default=2, validator=_non_negative)
    max_width: int = attr.field(default=32, validator=_non_negative)
    min_width: int = attr.field(default=1, validator=_non_negative)

    def __attrs_post_init__(self) -> None:
        if self.min_width > self.max_width:
            raise InvalidInput(
                f"min_width {self.min_width} exceeds max_width {self.max_width}", field="min_width"
            )


def _stripe(rng: np.random.Generator, extent: int, cfg: SpecAugmentConfig) -> slice:
    width = min(int(rng.integers(cfg.min_width, cfg.max_width + 1)), extent)
    start = int(rng.integers(0, extent - width + 1))
    return slice(start, start + width)


def spec_augment(
    log_mag: np.ndarray, cfg: SpecAugmentConfig, rng: np.random.Generator
) -> np.ndarray:
    """Mask random frequency rows and time columns of an (F, T) log-magnitude.

    Masked cells take the plane's mean log-magnitude. The input is not modified.
    """
    if log_mag.ndim != 2:
        raise InvalidInput(f"spec_augment expects an (F, T) plane, got shape {log_mag.shape}")
    out = np.array(log_mag, copy=True)
    if not cfg.enabled or cfg.max_width == 0:
        return out

    fill = float(np.mean(log_mag))
    n_freq, n_time = out.shape
    for _ in range(cfg.n_freq_masks):
        out[_stripe(rng, n_freq, cfg), :] = fill
    for _ in range(cfg.n_time_masks):
        out[:, _stripe(rng, n_time, cfg)] = fill
    return out


def crop_start(n_frames: int, rng: np.random.Generator, width: int = CROP_FRAMES) -> int:
    """Uniform start index of a width-frame window; 0 when the plane is no wider."""
    if n_frames < 1:
        raise InvalidInput("cannot crop an empty plane")
    return int(rng.integers(0, n_frames - width + 1)) if n_frames > width else 0


def crop_frames(plane: np.ndarray, start: int, width: int = CROP_FRAMES) -> np.ndarray:
    """Frames [start, start + width) along the last axis, edge-padded when short."""
    window = plane[..., start : start + width]
    missing = width - window.shape[-1]
    if missing > 0:
        pad = [(0, 0)] * (plane.ndim - 1) + [(0, missing)]
        window = np.pad(window, pad, mode="edge")
    return np.ascontiguousarray(window)


def random_crop(
    planes: Sequence[np.ndarray], rng: np.random.Generator, width: int = CROP_FRAMES
) -> tuple[list[np.ndarray], int]:
    """Crop paired planes to one shared window along their last (time) axis.

    Returns:
        The cropped planes and the start frame.

    Raises:
        InvalidInput: If the planes disagree on their frame count.
    """
    lengths = {p.shape[-1] for p in planes}
    if len(lengths) != 1:
        raise InvalidInput(f"paired planes have different frame counts {sorted(lengths)}")
    start = crop_start(lengths.pop(), rng, width)
    return [crop_frames(p, start, width) for p in planes], start
