"""Minimal reverse-mode automatic differentiation over numpy arrays.

Modules:
    tensor: Tensor, Parameter, backward, no_grad, precision
    functional: differentiable primitives (arithmetic, conv2d, attention, ...)
    spectral: istft_layer, the differentiable inverse STFT
    optim: Adam / adam_step
    checkpoint: single-file parameter containers
    gradcheck: finite-difference gradient checks
"""

from derevb.autodiff import functional
from derevb.autodiff.checkpoint import Checkpoint, config_hash, load_checkpoint, save_checkpoint
from derevb.autodiff.gradcheck import GradcheckResult, gradcheck
from derevb.autodiff.optim import Adam, AdamState, adam_step
from derevb.autodiff.spectral import istft_layer
from derevb.autodiff.tensor import Parameter, Tensor, backward, no_grad, precision

__all__ = [
    "Adam",
    "AdamState",
    "Checkpoint",
    "GradcheckResult",
    "Parameter",
    "Tensor",
    "adam_step",
    "backward",
    "config_hash",
    "functional",
    "gradcheck",
    "istft_layer",
    "load_checkpoint",
    "no_grad",
    "precision",
    "save_checkpoint",
]
