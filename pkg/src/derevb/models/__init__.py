"""Dereverberation networks: the S2S magnitude U-Net and the RI2RI complex U-Net."""

from derevb.models.bundle import (
    ModelBundle,
    load_bundle,
    save_bundle,
    two_stage_enhance,
)
from derevb.models.unet import (
    UNet,
    UNetConfig,
    ri2ri_config,
    ri2ri_forward,
    s2s_config,
    s2s_forward,
    self_attention_block,
)

__all__ = [
    "ModelBundle",
    "UNet",
    "UNetConfig",
    "load_bundle",
    "ri2ri_config",
    "ri2ri_forward",
    "s2s_config",
    "s2s_forward",
    "save_bundle",
    "self_attention_block",
    "two_stage_enhance",
]
