"""Hierarchical (variational) autoencoders with optional lateral context."""
from __future__ import annotations

from dataclasses import dataclass, field

import torch
from torch import nn

from lcsplit.datagen import ConfigurationError
from lcsplit.loss import gaussian_kl_map
from lcsplit.model.config import ModelConfig, Mode
from lcsplit.model.layers import (
    Normalization,
    CenterCrop,
    GaussianSample,
    MergeLayer,
    ResidualBlock,
    Scale,
    ZeroPadCenter,
    conv1x1,
    conv3x3,
    init_weights,
    raw_to_sigma,
    res_stack,
)


HEAD_INIT_SCALE = 0.1


@dataclass
class Prediction:
    mu1: torch.Tensor
    mu2: torch.Tensor
    logvar1: torch.Tensor | None = None
    logvar2: torch.Tensor | None = None

    def as_tensor(self) -> torch.Tensor:
        parts = [self.mu1, self.mu2]
        if self.logvar1 is not None:
            parts += [self.logvar1, self.logvar2]
        return torch.cat(parts, dim=1)

    @property
    def n_channels(self) -> int:
        return 2 if self.logvar1 is None else 4


@dataclass
class LevelLatent:
    z: torch.Tensor
    kl: torch.Tensor
    mu_q: torch.Tensor | None = None
    sigma_q: torch.Tensor | None = None
    mu_p: torch.Tensor | None = None
    sigma_p: torch.Tensor | None = None


@dataclass
class LatentState:
    levels: list[LevelLatent] = field(default_factory=list)

    @property
    def kl_total(self) -> torch.Tensor:
        return sum((lvl.kl for lvl in self.levels), torch.tensor(0.0))

    def min_sigma(self) -> float:
        vals = [float(t.detach().min()) for lvl in self.levels for t in (lvl.sigma_q, lvl.sigma_p) if t is not None]
        return min(vals) if vals else float("inf")


class InputBranch(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.conv = conv3x3(1, channels)
        self.act = nn.ELU()
        self.res = ResidualBlock(channels)

    def forward(self, x):
        if x.dim() != 4 or x.shape[1] != 1:
            raise ValueError(f"input branch expects (B, 1, h, w), got {tuple(x.shape)}")
        return self.res(self.act(self.conv(x)))


class BottomUpBlock(nn.Module):
    """Stride-2 conv, residual blocks, then optional zero-pad back and Deep-LC scaling."""

    def __init__(self, channels: int, n_res: int, pad_back: bool, divisor: float):
        super().__init__()
        self.down = conv3x3(channels, channels, stride=2)
        self.res = res_stack(channels, n_res)
        self.pad = ZeroPadCenter() if pad_back else None
        self.scale = Scale(divisor) if divisor != 1.0 else None

    def forward(self, x):
        if x.shape[-1] % 2 or x.shape[-2] % 2:
            raise ValueError(f"bottom-up block needs even spatial size, got {tuple(x.shape[-2:])}")
        y = self.res(self.down(x))
        if self.pad is not None:
            y = self.pad(y)
        if self.scale is not None:
            y = self.scale(y)
        return y


class StochasticBlock(nn.Module):
    """Gaussian latent layer; the identity for deterministic (HAE) models.

    The first half of each head's channels are means, the second half raw
    inputs to the ExpLin standard deviation.
    """

    def __init__(self, channels: int, z_channels: int, is_top: bool, variational: bool):
        super().__init__()
        self.is_top = is_top
        self.variational = variational
        if variational:
            self.prior_head = None if is_top else conv1x1(channels, 2 * z_channels)
            self.merge = None if is_top else MergeLayer(channels)
            self.post_head = conv1x1(channels, 2 * z_channels)
            self.sample = GaussianSample()
            self.z_proj = conv1x1(z_channels, channels)

    def forward(self, bu, td, n_pixels: int, generator=None, stochastic: bool = False):
        if not self.variational:
            out = bu if self.is_top else td
            return out, LevelLatent(z=out, kl=out.new_zeros(()))
        if self.is_top:
            b, _, hh, ww = bu.shape
            mu_p = bu.new_zeros((b, self.post_head.out_channels // 2, hh, ww))
            sigma_p = torch.ones_like(mu_p)
            post_in = bu
        else:
            if bu.shape != td.shape:
                raise ValueError(f"stochastic block shape mismatch {tuple(bu.shape)} vs {tuple(td.shape)}")
            mu_p, raw_p = torch.chunk(self.prior_head(td), 2, dim=1)
            sigma_p = raw_to_sigma(raw_p)
            post_in = self.merge(bu, td)
        mu_q, raw_q = torch.chunk(self.post_head(post_in), 2, dim=1)
        sigma_q = raw_to_sigma(raw_q)
        z = self.sample(mu_q, sigma_q, generator, stochastic)
        kl_map = gaussian_kl_map(mu_q, sigma_q, mu_p, sigma_p)
        # total nats of this level per input pixel, batch mean
        kl = kl_map.sum(dim=(1, 2, 3)).mean() / n_pixels
        return self.z_proj(z), LevelLatent(z, kl, mu_q, sigma_q, mu_p, sigma_p)


class TopDownBlock(nn.Module):
    def __init__(self, cfg: ModelConfig, level: int):
        super().__init__()
        c = cfg.base_channels
        self.level = level
        self.config = cfg
        self.is_top = level == cfg.n_levels
        self.pre = None if self.is_top else res_stack(c, cfg.res_blocks_per_block)
        self.stochastic = StochasticBlock(c, cfg.z_channels, self.is_top, cfg.is_variational)
        self.bu_crop = CenterCrop()  # Lean-LC: bring BU features to TD size
        self.crop = CenterCrop() if cfg.crops_td(level) else None
        self.upsample = nn.ConvTranspose2d(c, c, 2, stride=2)
        self.post = res_stack(c, cfg.res_blocks_per_block)
        self.skip_crop = CenterCrop()
        self.merge = MergeLayer(c)

    def forward(self, above, bu, skip, in_size: int, generator=None, stochastic=False):
        td = None
        if not self.is_top:
            td = self.pre(above)
        size = self.config.td_size(self.level, in_size)
        if bu.shape[-1] != size:
            bu = self.bu_crop(bu, size)
        n_pixels = in_size * in_size
        y, latent = self.stochastic(bu, td, n_pixels, generator, stochastic)
        if self.crop is not None:
            y = self.crop(y)
        y = self.post(self.upsample(y))
        if skip.shape[-1] != y.shape[-1]:
            skip = self.skip_crop(skip, y.shape[-1])
        return self.merge(y, skip), latent


class OutputBlock(nn.Module):
    def __init__(self, channels: int, n_out: int = 4):
        super().__init__()
        self.res = ResidualBlock(channels)
        self.head = conv1x1(channels, n_out)

    def forward(self, x):
        return self.head(self.res(x))


class HierarchicalNet(nn.Module):
    """Ladder of bottom-up and top-down blocks producing (mu1, mu2, logvar1, logvar2).

    Input is a (B, 1 + n_lc, h, h) stack: the primary patch followed by the
    context crops.  Context ``k`` is merged after BU block ``k + 1``.
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        cfg.validate()
        if cfg.mode is Mode.UNET_BASELINE:
            raise ConfigurationError("use build_baseline_unet for the U-Net baseline")
        self.config = cfg
        c = cfg.base_channels
        L = cfg.n_levels
        self.input_branches = nn.ModuleList([InputBranch(c) for _ in range(cfg.n_lc + 1)])
        self.bu_blocks = nn.ModuleList(
            [
                BottomUpBlock(c, cfg.res_blocks_per_block, cfg.pads_bu(i), cfg.bu_scale(i))
                for i in range(1, L + 1)
            ]
        )
        self.lateral_merges = nn.ModuleList([MergeLayer(c) for _ in range(cfg.n_lc)])
        self.td_blocks = nn.ModuleList([TopDownBlock(cfg, i) for i in range(1, L + 1)])
        self.output_block = OutputBlock(c, 4)
        self.normalization = Normalization()
        init_weights(self, cfg.seed)
        with torch.no_grad():
            # start every latent close to N(0, 1) so the first KL terms stay moderate
            for m in self.modules():
                if isinstance(m, StochasticBlock) and m.variational:
                    for head in (m.prior_head, m.post_head):
                        if head is not None:
                            head.weight.mul_(HEAD_INIT_SCALE)
        self.generator = torch.Generator().manual_seed(cfg.seed + 1)

    def reseed(self, seed: int) -> None:
        self.generator.manual_seed(seed)

    def set_deep_lc_scaling(self, enabled: bool) -> None:
        for m in self.modules():
            if isinstance(m, Scale):
                m.enabled = enabled

    def bottom_up(self, stack: torch.Tensor) -> list[torch.Tensor]:
        """Features ``f_0 .. f_L``; ``f_0`` is the primary input branch output."""
        cfg = self.config
        if stack.dim() != 4 or stack.shape[1] != cfg.n_lc + 1:
            raise ValueError(f"expected (B, {cfg.n_lc + 1}, h, h) stack, got {tuple(stack.shape)}")
        feats = [self.input_branches[0](stack[:, :1])]
        for i, block in enumerate(self.bu_blocks, start=1):
            u = block(feats[-1])
            if i <= cfg.n_lc:
                u = self.lateral_merges[i - 1](u, self.input_branches[i](stack[:, i : i + 1]))
            feats.append(u)
        return feats

    def forward(self, stack: torch.Tensor, stochastic: bool | None = None):
        """Return ``(Prediction, LatentState)``.

        Latents are sampled in training mode and set to the posterior mean in
        eval mode, unless ``stochastic`` overrides that.
        """
        if stochastic is None:
            stochastic = self.training
        feats = self.bottom_up(stack)
        in_size = stack.shape[-1]
        latents: list[LevelLatent] = []
        y = None
        for i in range(self.config.n_levels, 0, -1):
            block = self.td_blocks[i - 1]
            y, latent = block(y, feats[i], feats[i - 1], in_size, self.generator, stochastic)
            latents.append(latent)
        out = self.output_block(y)
        latents.reverse()
        pred = Prediction(out[:, 0:1], out[:, 1:2], out[:, 2:3], out[:, 3:4])
        return pred, LatentState(latents)

    @property
    def n_lc(self) -> int:
        return self.config.n_lc
