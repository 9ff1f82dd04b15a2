"""Building blocks shared by the hierarchical networks and the U-Net baseline.

Every tensor-producing step is a leaf module so that activation footprints
can be checked against forward hooks.
"""
from __future__ import annotations

import math

import torch
import torch.nn.functional as F
from torch import nn


def conv3x3(c_in: int, c_out: int, stride: int = 1) -> nn.Conv2d:
    # replicate padding keeps constant inputs constant up to the border
    return nn.Conv2d(c_in, c_out, 3, stride=stride, padding=1, padding_mode="replicate")


def conv1x1(c_in: int, c_out: int) -> nn.Conv2d:
    return nn.Conv2d(c_in, c_out, 1)


class Gate(nn.Module):
    """Split channels in half; the second half gates the first."""

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        a, b = torch.chunk(x, 2, dim=1)
        return F.elu(a) * torch.sigmoid(b)


class GatedLayer(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.conv = conv1x1(channels, 2 * channels)
        self.gate = Gate()

    def forward(self, x):
        return self.gate(self.conv(x))


class ResidualBlock(nn.Module):
    """Pre-activation pair of 3x3 convolutions, gated, with identity shortcut."""

    def __init__(self, channels: int):
        super().__init__()
        self.act1 = nn.ELU()
        self.conv1 = conv3x3(channels, channels)
        self.act2 = nn.ELU()
        self.conv2 = conv3x3(channels, channels)
        self.gated = GatedLayer(channels)

    def forward(self, x):
        y = self.conv1(self.act1(x))
        y = self.conv2(self.act2(y))
        return x + self.gated(y)


def res_stack(channels: int, n: int) -> nn.Sequential:
    return nn.Sequential(*[ResidualBlock(channels) for _ in range(n)])


class ZeroPadCenter(nn.Module):
    """Symmetric zero padding from ``s`` back up to ``2 s``."""

    def forward(self, x):
        p = x.shape[-1] // 2
        return F.pad(x, (p, p, p, p))


class CenterCrop(nn.Module):
    def __init__(self, size: int | None = None):
        super().__init__()
        self.size = size

    def forward(self, x, size: int | None = None):
        size = self.size if size is None else size
        if size is None:
            size = x.shape[-1] // 2
        h, w = x.shape[-2:]
        if size > min(h, w):
            raise ValueError(f"cannot crop {size} from {h}x{w}")
        r0, c0 = (h - size) // 2, (w - size) // 2
        return x[..., r0 : r0 + size, c0 : c0 + size]


class Concat(nn.Module):
    def forward(self, a, b):
        if a.shape[-2:] != b.shape[-2:]:
            raise ValueError(f"spatial mismatch: {tuple(a.shape[-2:])} vs {tuple(b.shape[-2:])}")
        return torch.cat([a, b], dim=1)


class Scale(nn.Module):
    def __init__(self, divisor: float):
        super().__init__()
        self.divisor = divisor
        self.enabled = True

    def forward(self, x):
        return x / self.divisor if self.enabled else x


class MergeLayer(nn.Module):
    """Concatenate two feature maps and mix them back to ``channels`` with a 1x1 conv."""

    def __init__(self, channels: int):
        super().__init__()
        self.concat = Concat()
        self.conv = conv1x1(2 * channels, channels)

    def forward(self, a, b):
        return self.conv(self.concat(a, b))


class GaussianSample(nn.Module):
    """Reparameterized draw; returns the mean when ``stochastic`` is False."""

    def forward(self, mu, sigma, generator: torch.Generator | None, stochastic: bool):
        if not stochastic:
            return mu
        eps = torch.randn(mu.shape, generator=generator, dtype=mu.dtype, device=mu.device)
        return mu + sigma * eps


SIGMA_FLOOR_LOG = -5.0
SIGMA_INPUT_CAP = 20.0


def sigma_explin(t: torch.Tensor) -> torch.Tensor:
    """exp(t) for t <= 0, t + 1 above; continuous with unit slope at 0."""
    return torch.where(t > 0, t + 1.0, torch.exp(torch.clamp(t, max=0.0)))


def raw_to_sigma(raw: torch.Tensor) -> torch.Tensor:
    """Cap the raw input at 20, apply ExpLin, floor at exp(-5)."""
    return sigma_explin(torch.clamp(raw, min=SIGMA_FLOOR_LOG, max=SIGMA_INPUT_CAP))


def init_weights(module: nn.Module, seed: int) -> None:
    """Fan-in scaled normal init from a private generator; biases zero."""
    g = torch.Generator().manual_seed(seed)
    for m in module.modules():
        if isinstance(m, nn.ConvTranspose2d):
            # each output pixel sees in_channels * (k / stride)**2 inputs
            fan_in = m.in_channels * (m.kernel_size[0] // m.stride[0]) * (m.kernel_size[1] // m.stride[1])
        elif isinstance(m, nn.Conv2d):
            fan_in = m.in_channels * m.kernel_size[0] * m.kernel_size[1]
        else:
            continue
        with torch.no_grad():
            m.weight.copy_(torch.randn(m.weight.shape, generator=g) / math.sqrt(fan_in))
            if m.bias is not None:
                m.bias.zero_()


class Normalization(nn.Module):
    """Dataset statistics (x, d1, d2 means and stds) stored with the weights."""

    def __init__(self):
        super().__init__()
        self.register_buffer("stats", torch.tensor([0.0, 1.0, 0.0, 1.0, 0.0, 1.0]))

    def set(self, x_mean, x_std, d1_mean, d1_std, d2_mean, d2_std) -> None:
        vals = [x_mean, x_std, d1_mean, d1_std, d2_mean, d2_std]
        self.stats.copy_(torch.tensor([float(v) for v in vals], dtype=self.stats.dtype))

    def as_tuple(self) -> tuple[float, ...]:
        return tuple(float(v) for v in self.stats)
