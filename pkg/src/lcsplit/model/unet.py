from __future__ import annotations

import torch
from torch import nn

from lcsplit.datagen import ConfigurationError
from lcsplit.model.config import ModelConfig, Mode
from lcsplit.model.layers import Concat, Normalization, conv1x1, conv3x3, init_weights


class ConvPair(nn.Module):
    def __init__(self, c_in: int, c_out: int, stride: int = 1):
        super().__init__()
        self.conv1 = conv3x3(c_in, c_out, stride=stride)
        self.act1 = nn.ELU()
        self.conv2 = conv3x3(c_out, c_out)
        self.act2 = nn.ELU()

    def forward(self, x):
        return self.act2(self.conv2(self.act1(self.conv1(x))))


class UNetBaseline(nn.Module):
    """Deterministic encoder-decoder with skips predicting (mu1, mu2).

    ``config.n_levels`` is the number of downsampling (BU) blocks; every block
    keeps ``base_channels`` channels.
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        if cfg.mode is not Mode.UNET_BASELINE:
            raise ConfigurationError("UNetBaseline needs mode=UNET_BASELINE")
        cfg.validate()
        self.config = cfg
        c = cfg.base_channels
        self.stem = ConvPair(1, c)
        self.down = nn.ModuleList([ConvPair(c, c, stride=2) for _ in range(cfg.n_levels)])
        self.up = nn.ModuleList([nn.ConvTranspose2d(c, c, 2, stride=2) for _ in range(cfg.n_levels)])
        self.concat = nn.ModuleList([Concat() for _ in range(cfg.n_levels)])
        self.fuse = nn.ModuleList([ConvPair(2 * c, c) for _ in range(cfg.n_levels)])
        self.head = conv1x1(c, 2)
        self.normalization = Normalization()
        init_weights(self, cfg.seed)

    @property
    def n_lc(self) -> int:
        return 0

    def forward(self, stack: torch.Tensor, stochastic: bool | None = None):
        from lcsplit.model.network import LatentState, Prediction

        if stack.dim() != 4 or stack.shape[1] != 1:
            raise ValueError(f"U-Net expects (B, 1, h, h), got {tuple(stack.shape)}")
        if stack.shape[-1] % 2**self.config.n_levels:
            raise ValueError(f"input side {stack.shape[-1]} not divisible by 2**{self.config.n_levels}")
        skips = [self.stem(stack)]
        for block in self.down:
            skips.append(block(skips[-1]))
        y = skips.pop()
        for j in reversed(range(self.config.n_levels)):
            y = self.fuse[j](self.concat[j](self.up[j](y), skips.pop()))
        out = self.head(y)
        return Prediction(out[:, 0:1], out[:, 1:2]), LatentState([])


def build_baseline_unet(depth: int, patch_size: int = 64, base_channels: int = 32, seed: int = 0) -> UNetBaseline:
    if not 1 <= depth <= 6:
        raise ConfigurationError(f"U-Net depth must be in [1, 6], got {depth}")
    cfg = ModelConfig(
        mode=Mode.UNET_BASELINE, n_levels=depth, patch_size=patch_size, base_channels=base_channels, seed=seed
    )
    return UNetBaseline(cfg)
