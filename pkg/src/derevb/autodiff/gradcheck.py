"""Finite-difference gradient checks.

gradcheck compares backward() against central differences of the same
function. Non-scalar outputs are reduced with a fixed random projection so
every output element contributes. The relative error is norm-wise per input:
||analytic - numeric|| / max(||analytic||, ||numeric||).
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from typing import Callable, Optional

import attr
import numpy as np

from derevb.autodiff import functional as F
from derevb.autodiff.tensor import Tensor, backward, no_grad, precision
from derevb.errors import InvalidInput

logger = logging.getLogger(__name__)


@attr.frozen
class GradcheckResult:
    """Worst-case relative error and per-input errors."""

    max_relative_error: float
    relative_errors: tuple[float, ...]
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_relative_error < self.tolerance


def gradcheck(
    fn: Callable[..., Tensor],
    inputs: Sequence[Tensor],
    h: float = 1e-4,
    tolerance: float = 1e-4,
    max_coords: Optional[int] = None,
    seed: int = 0,
) -> GradcheckResult:
    """Check fn's analytic gradients against central finite differences.

    Args:
        fn: Called as fn(*inputs); returns a Tensor.
        inputs: float64 leaves that require grad (tensors or parameters).
        h: Finite-difference step.
        tolerance: Pass threshold on the relative error.
        max_coords: Check at most this many random coordinates per input.
        seed: Seed for the output projection and the coordinate sample.

    Raises:
        InvalidInput: If an input is not float64 or does not require grad.
    """
    for index, tensor in enumerate(inputs):
        if tensor.data.dtype != np.float64:
            raise InvalidInput(f"input {index} is {tensor.data.dtype}; gradcheck needs float64")
        if not tensor.requires_grad or not tensor.is_leaf:
            raise InvalidInput(f"input {index} must be a leaf that requires grad")

    rng = np.random.default_rng(seed)
    saved_grads = [t.grad for t in inputs]

    with precision(np.float64):
        with no_grad():
            probe = fn(*inputs)
        projection = None if probe.data.size == 1 else rng.standard_normal(probe.shape)

        def objective() -> Tensor:
            out = fn(*inputs)
            return out if projection is None else F.sum(F.mul(out, projection))

        for tensor in inputs:
            tensor.grad = np.zeros_like(tensor.data)
        backward(objective())
        analytic = [np.asarray(t.grad, dtype=np.float64).copy() for t in inputs]

        errors = []
        with no_grad():
            for tensor, grad in zip(inputs, analytic):
                size = tensor.data.size
                if max_coords is not None and size > max_coords:
                    coords = rng.choice(size, size=max_coords, replace=False)
                else:
                    coords = np.arange(size)
                flat = tensor.data.reshape(-1)
                numeric = np.empty(coords.shape[0])
                for slot, coord in enumerate(coords):
                    original = flat[coord]
                    flat[coord] = original + h
                    upper = float(objective().data.sum())
                    flat[coord] = original - h
                    lower = float(objective().data.sum())
                    flat[coord] = original
                    numeric[slot] = (upper - lower) / (2.0 * h)
                expected = grad.reshape(-1)[coords]
                scale = max(float(np.linalg.norm(expected)), float(np.linalg.norm(numeric)), 1e-12)
                errors.append(float(np.linalg.norm(expected - numeric)) / scale)

    for tensor, grad in zip(inputs, saved_grads):
        tensor.grad = grad
    result = GradcheckResult(max(errors, default=0.0), tuple(errors), tolerance)
    logger.debug(f"gradcheck max relative error {result.max_relative_error:.3e}")
    return result
