"""Adam optimizer.

Moment estimates are kept per parameter name. Frozen parameters are skipped
entirely: their values, moments and step counts never change.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence

import attr
import numpy as np

from derevb.autodiff.tensor import Parameter

logger = logging.getLogger(__name__)


@attr.define
class AdamState:
    """First/second moments and step counts by parameter name."""

    m: dict[str, np.ndarray] = attr.Factory(dict)
    v: dict[str, np.ndarray] = attr.Factory(dict)
    t: dict[str, int] = attr.Factory(dict)


def adam_step(
    params: Sequence[Parameter],
    state: AdamState,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """Apply one bias-corrected Adam update in place."""
    for param in params:
        if param.frozen or param.grad is None:
            continue
        name = param.name
        grad = param.grad
        step = state.t.get(name, 0) + 1
        m = beta1 * state.m.get(name, np.zeros_like(grad)) + (1.0 - beta1) * grad
        v = beta2 * state.v.get(name, np.zeros_like(grad)) + (1.0 - beta2) * grad * grad
        state.m[name], state.v[name], state.t[name] = m, v, step

        m_hat = m / (1.0 - beta1**step)
        v_hat = v / (1.0 - beta2**step)
        update = lr * m_hat / (np.sqrt(v_hat) + eps)
        param.data = (param.data - update).astype(param.data.dtype)


class Adam:
    """Stateful wrapper over adam_step for a fixed parameter list."""

    def __init__(
        self,
        params: Sequence[Parameter],
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> None:
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.state = AdamState()

    def zero_grad(self) -> None:
        for param in self.params:
            param.zero_grad()

    def step(self) -> None:
        adam_step(self.params, self.state, self.lr, self.beta1, self.beta2, self.eps)
