"""Frequency-strided U-Net over (channels, freq, time) maps.

Encoder levels halve the frequency axis with stride-2 convolutions and keep
time intact, so the network is fully convolutional in time. The bottleneck
optionally passes through a single-head self-attention block whose tokens are
time frames. Decoder levels upsample frequency by nearest-neighbour repetition,
convolve, concatenate the matching encoder skip and fuse. A 1x1 head reads the
last decoder map together with the raw input.

Two output heads exist:
    tanh_gain: tanh(head) scaled by g = softplus(affine(mean-pooled bottleneck))
    linear: head output as is
"""

from __future__ import annotations

import logging
import math
from typing import Any, Literal, Optional

import attr
import numpy as np

from derevb.autodiff import functional as F
from derevb.autodiff.tensor import Parameter, Tensor
from derevb.errors import InvalidInput, ShapeError
from derevb.schema import unstructure

logger = logging.getLogger(__name__)

OutputActivation = Literal["tanh_gain", "linear"]
LEAKY_SLOPE = 0.2
MODEL_N_FREQ = 256


def _at_least_one(_inst: Any, attribute: Any, value: int) -> None:
    if value < 1:
        raise InvalidInput(f"{attribute.name} must be >= 1, got {value}", field=attribute.name)


def _kernel_valid(_inst: Any, attribute: Any, value: tuple[int, int]) -> None:
    if len(value) != 2 or min(value) < 1:
        raise InvalidInput(f"kernel must be two positive sizes, got {value}", field=attribute.name)


def _activation_valid(_inst: Any, attribute: Any, value: str) -> None:
    if value not in ("tanh_gain", "linear"):
        raise InvalidInput(
            f"output_activation must be 'tanh_gain' or 'linear', got {value!r}",
            field=attribute.name,
        )


@attr.frozen
class UNetConfig:
    """Architecture of one sub-network.

    Attributes:
        depth: Number of frequency-halving encoder levels.
        base_channels: Channels at the first level; level i has base * 2**i.
        kernel: (freq, time) convolution size.
        use_self_attention: Attention block on the bottleneck.
        in_channels / out_channels: Input and output maps.
        output_activation: "tanh_gain" or "linear".
        attention_dim: Query/key/value width of the attention block.
        n_freq: Frequency size of the input; divisible by 2**depth.
        gain_init: Initial output gain of the tanh_gain head.
    """

    depth: int = attr.field(default=4, validator=_at_least_one)
    base_channels: int = attr.field(default=16, validator=_at_least_one)
    kernel: tuple[int, int] = attr.field(
        default=(3, 3), converter=lambda v: tuple(int(k) for k in v), validator=_kernel_valid
    )
    use_self_attention: bool = True
    in_channels: int = attr.field(default=1, validator=_at_least_one)
    out_channels: int = attr.field(default=1, validator=_at_least_one)
    output_activation: str = attr.field(default="tanh_gain", validator=_activation_valid)
    attention_dim: int = attr.field(default=64, validator=_at_least_one)
    n_freq: int = attr.field(default=MODEL_N_FREQ, validator=_at_least_one)
    gain_init: float = 3.0

    def __attrs_post_init__(self) -> None:
        if self.n_freq % (2**self.depth) != 0:
            raise InvalidInput(
                f"n_freq {self.n_freq} is not divisible by 2**depth = {2**self.depth}",
                field="depth",
            )

    def channels(self, level: int) -> int:
        return self.base_channels * 2**level

    def to_dict(self) -> dict[str, Any]:
        return unstructure(self)


def s2s_config(**overrides: Any) -> UNetConfig:
    """Magnitude network: one channel in and out, attention, tanh-gain head."""
    settings: dict[str, Any] = {
        "use_self_attention": True,
        "in_channels": 1,
        "out_channels": 1,
        "output_activation": "tanh_gain",
    }
    settings.update(overrides)
    return UNetConfig(**settings)


def ri2ri_config(**overrides: Any) -> UNetConfig:
    """Complex network: real/imaginary channels, no attention, linear head."""
    settings: dict[str, Any] = {
        "use_self_attention": False,
        "in_channels": 2,
        "out_channels": 2,
        "output_activation": "linear",
    }
    settings.update(overrides)
    return UNetConfig(**settings)


def inverse_softplus(value: float) -> float:
    return value + math.log(-math.expm1(-value))


@attr.frozen(eq=False)
class ForwardTrace:
    """Intermediate values of one forward pass, for inspection and tests."""

    gain: Optional[np.ndarray]
    pre_gain: Optional[np.ndarray]
    attention: Optional[np.ndarray]


def self_attention_block(
    x: Tensor,
    w_query: Tensor,
    w_key: Tensor,
    w_value: Tensor,
    w_out: Tensor,
) -> tuple[Tensor, Tensor]:
    """Residual attention with time frames as tokens.

    Args:
        x: Bottleneck map (N, C, F', T); each frame is a C*F' feature vector.
        w_query, w_key, w_value: (C*F', d) projections.
        w_out: (d, C*F') projection back to the feature width.

    Returns:
        (map of the same shape as x, attention weights (N, T, T)).
    """
    if x.ndim != 4:
        raise ShapeError(f"attention input must be (N, C, F, T), got {x.shape}")
    n, c, f, t = x.shape
    width = c * f
    if w_query.shape[0] != width:
        raise ShapeError(f"attention expects {w_query.shape[0]} features per frame, got {width}")

    tokens = F.reshape(F.transpose(x, (0, 3, 1, 2)), (n, t, width))
    attended, weights = F.scaled_dot_product_attention(
        tokens @ w_query, tokens @ w_key, tokens @ w_value
    )
    mixed = tokens + attended @ w_out
    out = F.transpose(F.reshape(mixed, (n, t, c, f)), (0, 2, 3, 1))
    return out, weights


class UNet:
    """Parameters and forward pass of one U-Net.

    Parameters are created in a fixed order from the seed, named
    "<prefix>.<block>.<kind>".
    """

    def __init__(self, config: UNetConfig, seed: int = 0, prefix: str = "unet") -> None:
        self.config = config
        self.prefix = prefix
        self._rng = np.random.default_rng(seed)
        self.params: dict[str, Parameter] = {}

        cfg = config
        k_f, k_t = cfg.kernel
        self._conv("enc0", cfg.in_channels, cfg.channels(0), k_f, k_t)
        self._norm("enc0", cfg.channels(0))
        for level in range(1, cfg.depth + 1):
            self._conv(f"enc{level}", cfg.channels(level - 1), cfg.channels(level), k_f, k_t)
            self._norm(f"enc{level}", cfg.channels(level))

        bottleneck_width = cfg.channels(cfg.depth) * (cfg.n_freq // 2**cfg.depth)
        if cfg.use_self_attention:
            d = cfg.attention_dim
            for name in ("query", "key", "value"):
                self._dense(f"attn.{name}", bottleneck_width, d)
            self._dense("attn.out", d, bottleneck_width, scale=0.1)

        for level in range(cfg.depth, 0, -1):
            self._conv(f"dec{level}.up", cfg.channels(level), cfg.channels(level - 1), k_f, k_t)
            self._conv(f"dec{level}.fuse", 2 * cfg.channels(level - 1), cfg.channels(level - 1), k_f, k_t)
            self._norm(f"dec{level}.fuse", cfg.channels(level - 1))

        self._conv("head", cfg.channels(0) + cfg.in_channels, cfg.out_channels, 1, 1)
        if cfg.output_activation == "tanh_gain":
            self._add("gain.weight", self._rng.normal(0.0, 0.01, (cfg.channels(cfg.depth), 1)))
            self._add("gain.bias", np.full((1,), inverse_softplus(cfg.gain_init)))

    # parameter construction

    def _add(self, name: str, values: np.ndarray) -> None:
        full = f"{self.prefix}.{name}"
        self.params[full] = Parameter(values, full)

    def _conv(self, name: str, c_in: int, c_out: int, k_f: int, k_t: int) -> None:
        fan_in = c_in * k_f * k_t
        std = math.sqrt(2.0 / ((1.0 + LEAKY_SLOPE**2) * fan_in))
        self._add(f"{name}.weight", self._rng.normal(0.0, std, (c_out, c_in, k_f, k_t)))
        self._add(f"{name}.bias", np.zeros(c_out))

    def _norm(self, name: str, channels: int) -> None:
        self._add(f"{name}.norm.scale", np.ones((1, channels, 1, 1)))
        self._add(f"{name}.norm.shift", np.zeros((1, channels, 1, 1)))

    def _dense(self, name: str, d_in: int, d_out: int, scale: float = 1.0) -> None:
        self._add(f"{name}.weight", self._rng.normal(0.0, scale / math.sqrt(d_in), (d_in, d_out)))

    def p(self, name: str) -> Parameter:
        return self.params[f"{self.prefix}.{name}"]

    def parameters(self) -> list[Parameter]:
        return list(self.params.values())

    def set_frozen(self, frozen: bool) -> None:
        for param in self.params.values():
            param.frozen = frozen

    @property
    def frozen(self) -> bool:
        return all(p.frozen for p in self.params.values())

    # forward pass

    def _conv_norm_act(self, x: Tensor, name: str, stride_freq: int = 1) -> Tensor:
        h = F.conv2d(x, self.p(f"{name}.weight"), self.p(f"{name}.bias"), stride_freq)
        h = F.layer_norm(h, axes=(1, 2))
        h = h * self.p(f"{name}.norm.scale") + self.p(f"{name}.norm.shift")
        return F.leaky_relu(h, LEAKY_SLOPE)

    def forward_with_trace(self, x: Tensor) -> tuple[Tensor, ForwardTrace]:
        """Run the network on (N, in_channels, n_freq, T) input.

        Raises:
            ShapeError: If the input is not (N, in_channels, n_freq, T) with T >= 1.
        """
        cfg = self.config
        if x.ndim != 4 or x.shape[1] != cfg.in_channels or x.shape[2] != cfg.n_freq or x.shape[3] < 1:
            raise ShapeError(
                f"{self.prefix} expects (N, {cfg.in_channels}, {cfg.n_freq}, T), got {x.shape}"
            )

        skips = [self._conv_norm_act(x, "enc0")]
        for level in range(1, cfg.depth + 1):
            skips.append(self._conv_norm_act(skips[-1], f"enc{level}", stride_freq=2))
        h = skips.pop()

        attention = None
        if cfg.use_self_attention:
            h, weights = self_attention_block(
                h, self.p("attn.query.weight"), self.p("attn.key.weight"),
                self.p("attn.value.weight"), self.p("attn.out.weight"),
            )
            attention = weights.data
        bottleneck = h

        for level in range(cfg.depth, 0, -1):
            up = F.upsample_nearest(h, factor=2, axis=2)
            up = F.conv2d(up, self.p(f"dec{level}.up.weight"), self.p(f"dec{level}.up.bias"))
            merged = F.concat([up, skips[level - 1]], axis=1)
            h = self._conv_norm_act(merged, f"dec{level}.fuse")

        head = F.conv2d(F.concat([h, x], axis=1), self.p("head.weight"), self.p("head.bias"))
        if cfg.output_activation == "linear":
            return head, ForwardTrace(None, None, attention)

        pooled = F.mean(bottleneck, axis=(2, 3))
        gain = F.softplus(pooled @ self.p("gain.weight") + self.p("gain.bias"))
        pre_gain = F.tanh(head)
        out = pre_gain * F.reshape(gain, (x.shape[0], 1, 1, 1))
        return out, ForwardTrace(gain.data.reshape(-1).copy(), pre_gain.data, attention)

    def __call__(self, x: Tensor) -> Tensor:
        return self.forward_with_trace(x)[0]

    def set_pass_through(self, gain: float = 1000.0) -> None:
        """Overwrite the head so the output reproduces the input channels.

        The head reads the raw input beside the decoder map; zeroing the decoder
        weights and routing input channel i to output channel i makes a linear
        head an exact identity. The tanh_gain head becomes g * tanh(x / g),
        which is the identity up to a cubic term in x / g.
        """
        cfg = self.config
        if cfg.in_channels != cfg.out_channels:
            raise InvalidInput("pass-through needs equal input and output channels")
        weight = np.zeros_like(self.p("head.weight").data)
        route = 1.0 / gain if cfg.output_activation == "tanh_gain" else 1.0
        for channel in range(cfg.in_channels):
            weight[channel, cfg.channels(0) + channel, 0, 0] = route
        self.p("head.weight").data = weight
        self.p("head.bias").data = np.zeros_like(self.p("head.bias").data)
        if cfg.output_activation == "tanh_gain":
            self.p("gain.weight").data = np.zeros_like(self.p("gain.weight").data)
            bias = self.p("gain.bias")
            bias.data = np.full_like(bias.data, inverse_softplus(gain))


def _batched(x: Tensor, channels: int) -> Tensor:
    if x.ndim == 3:
        return F.reshape(x, (1,) + x.shape)
    if x.ndim != 4:
        raise ShapeError(f"expected ({channels}, F, T) or (N, {channels}, F, T), got {x.shape}")
    return x


def s2s_forward(net: UNet, log_mag: Tensor) -> Tensor:
    """Magnitude network on (1, 256, T) or (N, 1, 256, T); output has the input's shape."""
    out = net(_batched(log_mag, 1))
    return F.reshape(out, log_mag.shape) if log_mag.ndim == 3 else out


def ri2ri_forward(net: UNet, ri: Tensor) -> Tensor:
    """Complex network on (2, 256, T) or (N, 2, 256, T); output has the input's shape."""
    out = net(_batched(ri, 2))
    return F.reshape(out, ri.shape) if ri.ndim == 3 else out
