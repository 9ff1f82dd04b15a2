"""Decomposition networks: hierarchical (V)AEs with lateral context and a U-Net baseline."""
from lcsplit.model.checkpoint import load_checkpoint, save_checkpoint
from lcsplit.model.config import ModelConfig, Mode, Variant
from lcsplit.model.footprint import activation_footprint, conv_chain_receptive_field, receptive_field
from lcsplit.model.layers import raw_to_sigma, sigma_explin
from lcsplit.model.network import HierarchicalNet, LatentState, LevelLatent, Prediction
from lcsplit.model.unet import UNetBaseline, build_baseline_unet


def build(config: ModelConfig):
    """Instantiate the network described by ``config`` with seeded weights."""
    config.validate()
    if config.mode is Mode.UNET_BASELINE:
        return UNetBaseline(config)
    return HierarchicalNet(config)


__all__ = [
    "HierarchicalNet",
    "LatentState",
    "LevelLatent",
    "ModelConfig",
    "Mode",
    "Prediction",
    "UNetBaseline",
    "Variant",
    "activation_footprint",
    "build",
    "build_baseline_unet",
    "conv_chain_receptive_field",
    "load_checkpoint",
    "receptive_field",
    "raw_to_sigma",
    "save_checkpoint",
    "sigma_explin",
]
