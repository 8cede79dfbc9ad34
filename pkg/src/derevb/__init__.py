"""derevb: decoupled magnitude/phase speech dereverberation.

This package measures how much of reverberant-speech quality lives in the STFT
magnitude and how much in the phase, and trains a two-stage enhancer built on
that split: a magnitude network (S2S) followed by a complex real/imaginary
network (RI2RI) that repairs the phase.

Key Features:
    - Exact-reconstruction STFT with log-magnitude/phase recombination
    - Synthetic reverberant corpora (RT60, SNR, source distance) with manifests
    - CD, LLR, fwSegSNR and SI-SDR speech-quality measures
    - A small reverse-mode autodiff engine with U-Nets and a differentiable iSTFT
    - Staged pre-training, frozen fine-tuning and the freeze ablation

Usage:
    ```python
    from derevb import load_bundle, read_wav, two_stage_enhance, write_wav

    bundle = load_bundle("runs/finetune/model.ckpt")
    write_wav("enhanced.wav", two_stage_enhance(read_wav("noisy.wav"), bundle))
    ```
"""

from importlib.metadata import PackageNotFoundError, version

__version__: str

try:
    __version__ = version("derevb")
except PackageNotFoundError:
    # Package not installed (development mode without editable install)
    __version__ = "0.0.0+dev"


__license__ = "Apache-2.0"


# Public API exports
__all__ = [
    "DerevbError",
    "MetricsReport",
    "ModelBundle",
    "StftConfig",
    "Waveform",
    "__version__",
    "evaluate_pair",
    "istft",
    "load_bundle",
    "load_config",
    "read_wav",
    "stft",
    "two_stage_enhance",
    "write_wav",
]

from .audio import Waveform, read_wav, write_wav
from .config import load_config
from .errors import DerevbError
from .metrics import MetricsReport, evaluate_pair
from .models.bundle import ModelBundle, load_bundle, two_stage_enhance
from .stft import StftConfig, istft, stft
