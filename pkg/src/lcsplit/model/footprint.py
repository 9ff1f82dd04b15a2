"""Closed-form activation counts and receptive fields; nothing is allocated."""
from __future__ import annotations

import math
from typing import Iterable

from lcsplit.model.config import ModelConfig, Mode, Variant


def _res(c: int, s: int, n: int = 1) -> int:
    # ELU, conv, ELU, conv, 1x1 conv to 2c, gate
    return n * 7 * c * s * s


def _input_branch(c: int, s: int) -> int:
    return 2 * c * s * s + _res(c, s)


def _merge(c: int, s: int) -> int:
    return 3 * c * s * s


def activation_footprint(config: ModelConfig, patch_size: int | None = None) -> int:
    """Activation elements produced by one forward pass of a single patch.

    Counts the output of every elementary layer (convolutions, activations,
    gates, pads, crops, concatenations, scalings and latent draws).
    """
    cfg = config.validate()
    h = cfg.patch_size if patch_size is None else patch_size
    c = cfg.base_channels
    R = cfg.res_blocks_per_block
    if cfg.mode is Mode.UNET_BASELINE:
        return _unet_footprint(cfg, h)

    total = _input_branch(c, h)
    for i in range(1, cfg.n_levels + 1):
        s_in = cfg.bu_size(i - 1, h)
        half = s_in // 2
        total += c * half * half + _res(c, half, R)
        s_out = cfg.bu_size(i, h)
        if cfg.pads_bu(i):
            total += c * s_out * s_out
        if cfg.bu_scale(i) != 1.0:
            total += c * s_out * s_out
        if i <= cfg.n_lc:
            total += _input_branch(c, h) + _merge(c, s_out)

    z = cfg.z_channels
    for i in range(cfg.n_levels, 0, -1):
        top = i == cfg.n_levels
        t = cfg.td_size(i, h)
        if not top:
            total += _res(c, t, R)
        if cfg.bu_size(i, h) != t:
            total += c * t * t
        if cfg.is_variational:
            if not top:
                total += 2 * z * t * t + _merge(c, t)
            total += 2 * z * t * t + z * t * t + c * t * t
        crop = cfg.crops_td(i)
        if crop:
            total += c * (t // 2) ** 2
        u = t if crop else 2 * t
        total += c * u * u + _res(c, u, R)
        if cfg.bu_size(i - 1, h) != u:
            total += c * u * u
        total += _merge(c, u)

    total += _res(c, h) + 4 * h * h
    return total


def _unet_footprint(cfg: ModelConfig, h: int) -> int:
    c = cfg.base_channels
    pair = lambda s: 4 * c * s * s  # noqa: E731
    total = pair(h)
    for j in range(1, cfg.n_levels + 1):
        total += pair(h // 2**j)
    for j in range(cfg.n_levels, 0, -1):
        s = h // 2 ** (j - 1)
        total += c * s * s + 2 * c * s * s + pair(s)
    return total + 2 * h * h


# receptive fields -----------------------------------------------------------


def conv_chain_receptive_field(layers: Iterable[tuple[str, int, int]]) -> int:
    """Receptive field of a chain of ``(kind, kernel, stride)`` layers.

    ``kind`` is ``"conv"`` or ``"tconv"`` (transpose convolution).
    """
    rf, jump = 1.0, 1.0
    for kind, k, s in layers:
        if kind == "conv":
            rf += (k - 1) * jump
            jump *= s
        elif kind == "tconv":
            rf += (math.ceil(k / s) - 1) * jump
            jump /= s
        else:
            raise ValueError(f"unknown layer kind {kind!r}")
    return int(round(rf))


def _res_layers(n: int) -> list[tuple[str, int, int]]:
    return [("conv", 3, 1), ("conv", 3, 1), ("conv", 1, 1)] * n


def deepest_path(config: ModelConfig) -> list[tuple[str, int, int]]:
    """Layer chain from the primary input through the top level back to the output."""
    cfg = config
    R = cfg.res_blocks_per_block
    if cfg.mode is Mode.UNET_BASELINE:
        pair = [("conv", 3, 1), ("conv", 3, 1)]
        down = [("conv", 3, 2), ("conv", 3, 1)]
        up = [("tconv", 2, 2)] + pair
        return pair + down * cfg.n_levels + up * cfg.n_levels + [("conv", 1, 1)]
    layers = [("conv", 3, 1)] + _res_layers(1)
    for _ in range(cfg.n_levels):
        layers += [("conv", 3, 2)] + _res_layers(R)
    for i in range(cfg.n_levels, 0, -1):
        if i != cfg.n_levels:
            layers += _res_layers(R)
        if cfg.mode is Mode.HVAE:
            layers += [("conv", 1, 1)] * (3 if i != cfg.n_levels else 2)
        layers += [("tconv", 2, 2)] + _res_layers(R) + [("conv", 1, 1)]
    return layers + _res_layers(1) + [("conv", 1, 1)]


def receptive_field(config: ModelConfig) -> int:
    """Side length of the input region that can influence one output pixel.

    For lateral-context variants this is the effective field of view, the
    largest context crop ``2**n_lc * h``.
    """
    cfg = config.validate()
    if cfg.mode is not Mode.UNET_BASELINE and cfg.variant is not Variant.VANILLA:
        return 2**cfg.n_lc * cfg.patch_size
    return conv_chain_receptive_field(deepest_path(cfg))
