"""Run configuration.

A config document is JSON or YAML:

    schema_version: 1
    seed: 0
    normalization: utterance_std
    stft: {frame_len: 512, hop_len: 256}
    metrics: {lpc_order: 16}
    s2s: {depth: 2, base_channels: 8}
    ri2ri: {depth: 2, base_channels: 8}
    training: {lr: 0.001, steps: 500, spec_augment: {max_width: 16}}

Every section is optional and missing keys take their defaults. The s2s and
ri2ri sections override the defaults of their own network (the S2S defaults
enable attention and the tanh-gain head, the RI2RI defaults do not). Unknown
keys and invalid values raise ConfigError with the dotted field path.
"""

from __future__ import annotations

import logging
from collections.abc import Mapping
from pathlib import Path
from typing import Any, Optional, Union

import attr
import yaml

from derevb.autodiff.checkpoint import config_hash
from derevb.errors import ConfigError
from derevb.metrics import LpcFrameConfig
from derevb.models.bundle import NORMALIZATION_MODES, ModelBundle
from derevb.models.unet import UNetConfig, ri2ri_config, s2s_config
from derevb.schema import structure, unstructure
from derevb.stft import StftConfig
from derevb.training.loop import TrainingConfig

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


@attr.frozen
class DerevbConfig:
    """Complete configuration of a run."""

    schema_version: int = SCHEMA_VERSION
    seed: int = 0
    normalization: str = "utterance_std"
    stft: StftConfig = attr.Factory(StftConfig)
    metrics: LpcFrameConfig = attr.Factory(LpcFrameConfig)
    s2s: UNetConfig = attr.Factory(s2s_config)
    ri2ri: UNetConfig = attr.Factory(ri2ri_config)
    training: TrainingConfig = attr.Factory(TrainingConfig)

    def __attrs_post_init__(self) -> None:
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(
                f"unsupported schema_version {self.schema_version}, expected {SCHEMA_VERSION}",
                field="schema_version",
            )
        if self.normalization not in NORMALIZATION_MODES:
            raise ConfigError(
                f"normalization must be one of {list(NORMALIZATION_MODES)}", field="normalization"
            )
        for name in ("s2s", "ri2ri"):
            net: UNetConfig = getattr(self, name)
            if net.n_freq != self.stft.n_bins - 1:
                raise ConfigError(
                    f"n_freq {net.n_freq} does not match the {self.stft.n_bins - 1} model bins "
                    "of the STFT",
                    field=f"{name}.n_freq",
                )

    def new_bundle(self) -> ModelBundle:
        """Freshly initialized networks for this config."""
        return ModelBundle.create(self.s2s, self.ri2ri, self.stft, self.seed, self.normalization)

    def hash(self) -> str:
        return config_hash(unstructure(self))


def _merge_network(defaults: UNetConfig, section: Any, name: str, n_freq: Any) -> Any:
    if section is None:
        section = {}
    if not isinstance(section, Mapping):
        raise ConfigError(f"expected a mapping, got {type(section).__name__}", field=name)
    return {**unstructure(defaults), "n_freq": n_freq, **section}


def _model_bins(stft_section: Any) -> Any:
    # networks see every bin but Nyquist unless a section says otherwise
    if isinstance(stft_section, Mapping) and "frame_len" in stft_section:
        frame_len = stft_section["frame_len"]
        return frame_len // 2 if isinstance(frame_len, int) else frame_len
    return StftConfig().n_bins - 1


def parse_config(document: Any) -> DerevbConfig:
    """Structure a parsed document.

    Raises:
        ConfigError: On schema violations, naming the field path.
    """
    if document is None:
        document = {}
    if not isinstance(document, Mapping):
        raise ConfigError(f"config must be a mapping, got {type(document).__name__}")
    merged = dict(document)
    n_freq = _model_bins(document.get("stft"))
    merged["s2s"] = _merge_network(s2s_config(), document.get("s2s"), "s2s", n_freq)
    merged["ri2ri"] = _merge_network(ri2ri_config(), document.get("ri2ri"), "ri2ri", n_freq)
    return structure(DerevbConfig, merged)


def merge_documents(base: Mapping[str, Any], overrides: Mapping[str, Any]) -> dict[str, Any]:
    """Recursive merge; mappings merge key by key, anything else replaces."""
    merged = dict(base)
    for key, value in overrides.items():
        current = merged.get(key)
        if isinstance(current, Mapping) and isinstance(value, Mapping):
            merged[key] = merge_documents(current, value)
        else:
            merged[key] = value
    return merged


def load_config(
    path: Optional[Union[str, Path]] = None, overrides: Optional[Mapping[str, Any]] = None
) -> DerevbConfig:
    """Read a JSON or YAML config file and apply command-line overrides.

    Args:
        path: Config file; None starts from an empty document (all defaults).
        overrides: Partial document merged over the file before structuring.

    Raises:
        ConfigError: If the file cannot be read or parsed, or violates the schema.
    """
    document: Any = {}
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        try:
            document = yaml.safe_load(text)
        except yaml.YAMLError as e:
            raise ConfigError(f"config {path} is not valid JSON/YAML: {e}") from e
        if document is None:
            document = {}
        if not isinstance(document, Mapping):
            raise ConfigError(f"config must be a mapping, got {type(document).__name__}")

    config = parse_config(merge_documents(document, overrides or {}))
    logger.info(f"Loaded config {path or '<defaults>'} (hash {config.hash()[:12]})")
    return config


__all__ = ["DerevbConfig", "config_hash", "load_config", "merge_documents", "parse_config"]
