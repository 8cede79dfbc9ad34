"""Differentiable dense tensors.

A Tensor wraps a numpy array. Operations on tensors that require gradients
record their parents and a backward closure mapping the output gradient to one
gradient per parent; backward() walks that graph in reverse topological order.
The graph is retained after backward, so calling it twice accumulates twice.

Parameters are leaf tensors with a name and a frozen flag. A frozen Parameter
does not require gradients, so no graph is built through it and its grad buffer
stays at zero.
"""

from __future__ import annotations

import contextlib
import logging
from collections.abc import Iterator, Sequence
from contextvars import ContextVar
from typing import Any, Callable, Optional, Union

import numpy as np

from derevb.errors import GraphError, InvalidInput

logger = logging.getLogger(__name__)

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]
ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence[Any]]

_grad_enabled: ContextVar[bool] = ContextVar("derevb_grad_enabled", default=True)
_default_dtype: ContextVar[Any] = ContextVar("derevb_default_dtype", default=np.float32)


def grad_enabled() -> bool:
    return _grad_enabled.get()


def default_dtype() -> Any:
    return _default_dtype.get()


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Run operations without recording a backward graph."""
    token = _grad_enabled.set(False)
    try:
        yield
    finally:
        _grad_enabled.reset(token)


@contextlib.contextmanager
def precision(dtype: Any) -> Iterator[None]:
    """Set the dtype new tensors and parameters are stored in.

    Training runs in float32; gradient checks wrap their work in
    precision(np.float64).
    """
    token = _default_dtype.set(np.dtype(dtype).type)
    try:
        yield
    finally:
        _default_dtype.reset(token)


class Tensor:
    """n-dimensional array with an optional backward-graph record.

    Attributes:
        data: Values, a contiguous numpy array.
        grad: Accumulated gradient of a leaf, None until backward reaches it.
    """

    def __init__(
        self,
        data: ArrayLike,
        requires_grad: bool = False,
        *,
        dtype: Any = None,
    ) -> None:
        if isinstance(data, Tensor):
            data = data.data
        self.data: np.ndarray = np.asarray(data, dtype=dtype or default_dtype(), order="C")
        self.grad: Optional[np.ndarray] = None
        self._requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Optional[BackwardFn] = None
        self._op = ""

    @classmethod
    def _from_op(
        cls, data: np.ndarray, parents: Sequence[Tensor], backward: BackwardFn, op: str
    ) -> Tensor:
        out = cls(data, dtype=data.dtype)
        if grad_enabled() and any(p.requires_grad for p in parents):
            out._requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
            out._op = op
        return out

    @property
    def requires_grad(self) -> bool:
        return self._requires_grad

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def ndim(self) -> int:
        return int(self.data.ndim)

    @property
    def dtype(self) -> Any:
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return self._backward is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise InvalidInput(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> Tensor:
        """Same values, cut from the graph."""
        return Tensor(self.data, dtype=self.data.dtype)

    def zero_grad(self) -> None:
        self.grad = None if self.grad is None else np.zeros_like(self.grad)

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}{flag})"

    # operator overloads delegate to derevb.autodiff.functional

    def __add__(self, other: ArrayLike) -> Tensor:
        return F.add(self, other)

    def __radd__(self, other: ArrayLike) -> Tensor:
        return F.add(other, self)

    def __sub__(self, other: ArrayLike) -> Tensor:
        return F.sub(self, other)

    def __rsub__(self, other: ArrayLike) -> Tensor:
        return F.sub(other, self)

    def __mul__(self, other: ArrayLike) -> Tensor:
        return F.mul(self, other)

    def __rmul__(self, other: ArrayLike) -> Tensor:
        return F.mul(other, self)

    def __truediv__(self, other: ArrayLike) -> Tensor:
        return F.div(self, other)

    def __rtruediv__(self, other: ArrayLike) -> Tensor:
        return F.div(other, self)

    def __neg__(self) -> Tensor:
        return F.neg(self)

    def __pow__(self, exponent: float) -> Tensor:
        return F.power(self, exponent)

    def __matmul__(self, other: ArrayLike) -> Tensor:
        return F.matmul(self, other)

    def __getitem__(self, index: Any) -> Tensor:
        return F.getitem(self, index)

    def reshape(self, *shape: Any) -> Tensor:
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return F.reshape(self, shape)

    def transpose(self, *axes: int) -> Tensor:
        return F.transpose(self, axes or None)

    def sum(self, axis: Any = None, keepdims: bool = False) -> Tensor:
        return F.sum(self, axis, keepdims)

    def mean(self, axis: Any = None, keepdims: bool = False) -> Tensor:
        return F.mean(self, axis, keepdims)


class Parameter(Tensor):
    """Trainable leaf tensor.

    The grad buffer starts at zero; a frozen parameter never receives gradient
    and is skipped by the optimizer.
    """

    def __init__(self, data: ArrayLike, name: str, frozen: bool = False, *, dtype: Any = None) -> None:
        super().__init__(data, requires_grad=True, dtype=dtype)
        self.name = name
        self.frozen = frozen
        self.grad = np.zeros_like(self.data)

    @property
    def requires_grad(self) -> bool:
        return not self.frozen

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def __repr__(self) -> str:
        state = "frozen" if self.frozen else "trainable"
        return f"Parameter({self.name!r}, shape={self.shape}, {state})"


def as_tensor(value: ArrayLike, like: Optional[Tensor] = None) -> Tensor:
    """Wrap constants; tensors pass through unchanged."""
    if isinstance(value, Tensor):
        return value
    dtype = like.data.dtype if like is not None else None
    return Tensor(value, dtype=dtype)


def _topological_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited and parent.requires_grad:
                stack.append((parent, False))
    return order


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into every reachable leaf that requires grad.

    Raises:
        InvalidInput: If loss is not a scalar.
        GraphError: If loss was not produced by a recorded graph.
    """
    if loss.data.size != 1:
        raise InvalidInput(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise GraphError("loss has no backward graph; no input requires grad")

    order = _topological_order(loss)
    pending: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        grad = pending.pop(id(node), None)
        if grad is None:
            continue
        if node._backward is None:
            node.grad = grad.copy() if node.grad is None else node.grad + grad
            continue
        for parent, parent_grad in zip(node._parents, node._backward(grad)):
            if parent_grad is None or not parent.requires_grad:
                continue
            key = id(parent)
            pending[key] = parent_grad if key not in pending else pending[key] + parent_grad


from derevb.autodiff import functional as F  # noqa: E402
