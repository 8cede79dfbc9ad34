"""Differentiable primitives.

Each primitive computes its forward value with numpy and registers a backward
closure that maps the output gradient to one gradient per input (None for
inputs that take no gradient). Broadcasting binary ops reduce their gradients
back to each operand's shape.

Convolutions follow the spectrogram layout (batch, channels, freq, time): the
stride applies to the frequency axis only and padding is 'same', so the time
axis is never resampled.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from typing import Any, Optional, Union

import numpy as np
from scipy.special import expit

from derevb.autodiff.tensor import ArrayLike, Tensor, as_tensor
from derevb.errors import ShapeError

logger = logging.getLogger(__name__)

Axis = Union[int, tuple[int, ...], None]


def unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _pair(a: ArrayLike, b: ArrayLike) -> tuple[Tensor, Tensor]:
    if isinstance(a, Tensor):
        b = as_tensor(b, like=a)
    else:
        b = as_tensor(b)
        a = as_tensor(a, like=b)
    assert isinstance(a, Tensor) and isinstance(b, Tensor)
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as e:
        raise ShapeError(f"operands do not broadcast: {a.shape} and {b.shape}") from e
    return a, b


def _normalize_axes(axis: Axis, ndim: int) -> tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    return tuple(sorted(a % ndim for a in axes))


# elementwise arithmetic


def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    x, y = _pair(a, b)

    def _backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return unbroadcast(g, x.shape), unbroadcast(g, y.shape)

    return Tensor._from_op(x.data + y.data, (x, y), _backward, "add")


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    x, y = _pair(a, b)

    def _backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return unbroadcast(g, x.shape), unbroadcast(-g, y.shape)

    return Tensor._from_op(x.data - y.data, (x, y), _backward, "sub")


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    x, y = _pair(a, b)

    def _backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return unbroadcast(g * y.data, x.shape), unbroadcast(g * x.data, y.shape)

    return Tensor._from_op(x.data * y.data, (x, y), _backward, "mul")


def div(a: ArrayLike, b: ArrayLike) -> Tensor:
    x, y = _pair(a, b)

    def _backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return (
            unbroadcast(g / y.data, x.shape),
            unbroadcast(-g * x.data / (y.data * y.data), y.shape),
        )

    return Tensor._from_op(x.data / y.data, (x, y), _backward, "div")


def neg(x: Tensor) -> Tensor:
    return Tensor._from_op(-x.data, (x,), lambda g: (-g,), "neg")


def power(x: Tensor, exponent: float) -> Tensor:
    def _backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (g * exponent * x.data ** (exponent - 1),)

    return Tensor._from_op(x.data**exponent, (x,), _backward, "pow")


def square(x: Tensor) -> Tensor:
    return Tensor._from_op(x.data * x.data, (x,), lambda g: (2.0 * g * x.data,), "square")


def exp(x: Tensor) -> Tensor:
    out = np.exp(x.data)
    return Tensor._from_op(out, (x,), lambda g: (g * out,), "exp")


def log(x: Tensor) -> Tensor:
    return Tensor._from_op(np.log(x.data), (x,), lambda g: (g / x.data,), "log")


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)
    return Tensor._from_op(out, (x,), lambda g: (g * (1.0 - out * out),), "tanh")


def sigmoid(x: Tensor) -> Tensor:
    out = expit(x.data)
    return Tensor._from_op(out, (x,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def softplus(x: Tensor) -> Tensor:
    out = np.logaddexp(0.0, x.data).astype(x.data.dtype)
    return Tensor._from_op(out, (x,), lambda g: (g * expit(x.data),), "softplus")


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    positive = x.data > 0
    out = np.where(positive, x.data, slope * x.data).astype(x.data.dtype)
    scale = np.where(positive, 1.0, slope).astype(x.data.dtype)
    return Tensor._from_op(out, (x,), lambda g: (g * scale,), "leaky_relu")


# reductions


def sum(x: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    axes = _normalize_axes(axis, x.ndim)

    def _backward(g: np.ndarray) -> tuple[np.ndarray]:
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, x.shape),)

    return Tensor._from_op(np.sum(x.data, axis=axes, keepdims=keepdims), (x,), _backward, "sum")


def mean(x: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:
    axes = _normalize_axes(axis, x.ndim)
    count = int(np.prod([x.shape[a] for a in axes])) if axes else 1
    return mul(sum(x, axes, keepdims), 1.0 / count)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - np.max(x.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / np.sum(e, axis=axis, keepdims=True)

    def _backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (out * (g - np.sum(g * out, axis=axis, keepdims=True)),)

    return Tensor._from_op(out, (x,), _backward, "softmax")


def layer_norm(x: Tensor, axes: Axis, eps: float = 1e-5) -> Tensor:
    """Zero-mean, unit-variance normalization over axes (no affine)."""
    norm_axes = _normalize_axes(axes, x.ndim)
    centred = x.data - np.mean(x.data, axis=norm_axes, keepdims=True)
    inv_std = 1.0 / np.sqrt(np.mean(centred * centred, axis=norm_axes, keepdims=True) + eps)
    xhat = centred * inv_std

    def _backward(g: np.ndarray) -> tuple[np.ndarray]:
        g_mean = np.mean(g, axis=norm_axes, keepdims=True)
        gx_mean = np.mean(g * xhat, axis=norm_axes, keepdims=True)
        return (inv_std * (g - g_mean - xhat * gx_mean),)

    return Tensor._from_op(xhat, (x,), _backward, "layer_norm")


# shape manipulation


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    try:
        out = x.data.reshape(tuple(shape))
    except ValueError as e:
        raise ShapeError(f"cannot reshape {x.shape} to {tuple(shape)}") from e
    return Tensor._from_op(out, (x,), lambda g: (g.reshape(x.shape),), "reshape")


def transpose(x: Tensor, axes: Optional[Sequence[int]] = None) -> Tensor:
    perm = tuple(range(x.ndim))[::-1] if axes is None else tuple(axes)
    inverse = tuple(int(i) for i in np.argsort(perm))
    return Tensor._from_op(
        np.transpose(x.data, perm), (x,), lambda g: (np.transpose(g, inverse),), "transpose"
    )


def swapaxes(x: Tensor, axis1: int, axis2: int) -> Tensor:
    perm = list(range(x.ndim))
    perm[axis1], perm[axis2] = perm[axis2], perm[axis1]
    return transpose(x, perm)


def getitem(x: Tensor, index: Any) -> Tensor:
    def _backward(g: np.ndarray) -> tuple[np.ndarray]:
        grad = np.zeros_like(x.data)
        np.add.at(grad, index, g)
        return (grad,)

    return Tensor._from_op(np.asarray(x.data[index]), (x,), _backward, "getitem")


def pad(x: Tensor, pad_width: Sequence[tuple[int, int]], value: float = 0.0) -> Tensor:
    """Constant padding; pad_width holds one (before, after) pair per axis."""
    widths = tuple((int(b), int(a)) for b, a in pad_width)
    if len(widths) != x.ndim:
        raise ShapeError(f"pad_width needs {x.ndim} pairs, got {len(widths)}")
    region = tuple(slice(b, b + n) for (b, _), n in zip(widths, x.shape))
    out = np.pad(x.data, widths, mode="constant", constant_values=value)
    return Tensor._from_op(out, (x,), lambda g: (g[region],), "pad")


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise ShapeError("concat needs at least one tensor")
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as e:
        raise ShapeError(f"cannot concatenate shapes {[t.shape for t in tensors]}") from e
    splits = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def _backward(g: np.ndarray) -> list[np.ndarray]:
        return np.split(g, splits, axis=axis)

    return Tensor._from_op(out, tuple(tensors), _backward, "concat")


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise ShapeError("stack needs at least one tensor")
    position = axis % (tensors[0].ndim + 1)
    expanded = [reshape(t, t.shape[:position] + (1,) + t.shape[position:]) for t in tensors]
    return concat(expanded, axis=position)


def upsample_nearest(x: Tensor, factor: int = 2, axis: int = 2) -> Tensor:
    """Repeat every element factor times along axis."""
    axis %= x.ndim
    shape = x.shape

    def _backward(g: np.ndarray) -> tuple[np.ndarray]:
        split = shape[:axis] + (shape[axis], factor) + shape[axis + 1 :]
        return (g.reshape(split).sum(axis=axis + 1),)

    return Tensor._from_op(np.repeat(x.data, factor, axis=axis), (x,), _backward, "upsample")


# linear algebra


def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    x = as_tensor(a) if not isinstance(a, Tensor) else a
    y = as_tensor(b, like=x)
    if x.ndim < 2 or y.ndim < 2:
        raise ShapeError(f"matmul needs operands of rank >= 2, got {x.shape} and {y.shape}")
    if x.shape[-1] != y.shape[-2]:
        raise ShapeError(f"matmul inner dimensions differ: {x.shape} @ {y.shape}")
    try:
        out = np.matmul(x.data, y.data)
    except ValueError as e:
        raise ShapeError(f"matmul batch dimensions differ: {x.shape} @ {y.shape}") from e

    def _backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        gx = np.matmul(g, np.swapaxes(y.data, -1, -2))
        gy = np.matmul(np.swapaxes(x.data, -1, -2), g)
        return unbroadcast(gx, x.shape), unbroadcast(gy, y.shape)

    return Tensor._from_op(out, (x, y), _backward, "matmul")


def _same_padding(size: int, kernel: int, stride: int) -> tuple[int, tuple[int, int]]:
    out = -(-size // stride)
    total = max((out - 1) * stride + kernel - size, 0)
    return out, (total // 2, total - total // 2)


def conv2d(
    x: Tensor, weight: Tensor, bias: Optional[Tensor] = None, stride_freq: int = 1
) -> Tensor:
    """2-D cross-correlation over (freq, time) with 'same' padding.

    Args:
        x: Input (N, C_in, F, T).
        weight: Kernels (C_out, C_in, kF, kT).
        bias: Optional (C_out,) offsets.
        stride_freq: Frequency-axis stride; the time stride is always 1.

    Returns:
        (N, C_out, ceil(F / stride_freq), T).

    Raises:
        ShapeError: On rank or channel mismatch.
    """
    if x.ndim != 4 or weight.ndim != 4:
        raise ShapeError(f"conv2d needs 4-D input and weight, got {x.shape} and {weight.shape}")
    n, c_in, f, t = x.shape
    c_out, w_in, k_f, k_t = weight.shape
    if w_in != c_in:
        raise ShapeError(f"input has {c_in} channels, weight expects {w_in}")
    if bias is not None and bias.shape != (c_out,):
        raise ShapeError(f"bias must have shape ({c_out},), got {bias.shape}")

    f_out, pad_f = _same_padding(f, k_f, stride_freq)
    _, pad_t = _same_padding(t, k_t, 1)
    xp = np.pad(x.data, ((0, 0), (0, 0), pad_f, pad_t))
    span = stride_freq * (f_out - 1) + 1

    out = np.zeros((n, c_out, f_out, t), dtype=np.result_type(x.data, weight.data))
    for i in range(k_f):
        for j in range(k_t):
            window = xp[:, :, i : i + span : stride_freq, j : j + t]
            out += np.moveaxis(np.tensordot(window, weight.data[:, :, i, j], axes=([1], [1])), -1, 1)
    if bias is not None:
        out += bias.data[None, :, None, None]

    def _backward(g: np.ndarray) -> list[Optional[np.ndarray]]:
        gxp = np.zeros_like(xp)
        gw = np.zeros_like(weight.data)
        for i in range(k_f):
            for j in range(k_t):
                window = xp[:, :, i : i + span : stride_freq, j : j + t]
                gw[:, :, i, j] = np.tensordot(g, window, axes=([0, 2, 3], [0, 2, 3]))
                gxp[:, :, i : i + span : stride_freq, j : j + t] += np.moveaxis(
                    np.tensordot(g, weight.data[:, :, i, j], axes=([1], [0])), -1, 1
                )
        gx = gxp[:, :, pad_f[0] : pad_f[0] + f, pad_t[0] : pad_t[0] + t]
        grads: list[Optional[np.ndarray]] = [gx, gw]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return grads

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor._from_op(out, parents, _backward, "conv2d")


def scaled_dot_product_attention(
    q: Tensor, k: Tensor, v: Tensor
) -> tuple[Tensor, Tensor]:
    """Single-head attention over the second-to-last axis.

    Args:
        q, k: (..., T, d_k) queries and keys.
        v: (..., T, d_v) values.

    Returns:
        (output (..., T, d_v), weights (..., T, T)); weight rows sum to 1.
    """
    if q.shape[-1] != k.shape[-1]:
        raise ShapeError(f"query and key widths differ: {q.shape} vs {k.shape}")
    scores = div(matmul(q, swapaxes(k, -1, -2)), math.sqrt(q.shape[-1]))
    weights = softmax(scores, axis=-1)
    return matmul(weights, v), weights
