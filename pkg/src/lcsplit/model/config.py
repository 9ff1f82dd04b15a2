from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass, replace

from lcsplit.datagen import ConfigurationError


class Mode(str, enum.Enum):
    HAE = "hae"
    HVAE = "hvae"
    UNET_BASELINE = "unet"


class Variant(str, enum.Enum):
    VANILLA = "vanilla"
    LC = "lc"
    LEAN_LC = "lean_lc"
    DEEP_LC = "deep_lc"


@dataclass(frozen=True)
class ModelConfig:
    """Architecture of a decomposition network.

    For ``UNET_BASELINE`` ``n_levels`` is the number of encoder blocks and
    ``variant``/``n_lc``/``z_channels`` are ignored.
    """

    mode: Mode = Mode.HVAE
    variant: Variant = Variant.VANILLA
    n_levels: int = 3
    n_lc: int = 0
    patch_size: int = 64
    base_channels: int = 32
    res_blocks_per_block: int = 1
    z_channels: int = 32
    seed: int = 0
    deep_lc_scaling: bool = True

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "variant", Variant(self.variant))

    def validate(self) -> "ModelConfig":
        L, h, k = self.n_levels, self.patch_size, self.n_lc
        if h < 4 or h & (h - 1):
            raise ConfigurationError(f"patch_size must be a power of two, got {h}")
        if self.base_channels < 1 or self.res_blocks_per_block < 0:
            raise ConfigurationError("base_channels must be >= 1 and res_blocks_per_block >= 0")
        if self.mode is Mode.UNET_BASELINE:
            if not 1 <= L <= 6:
                raise ConfigurationError(f"U-Net depth must be in [1, 6], got {L}")
            if 2**L > h:
                raise ConfigurationError(f"U-Net depth {L} too deep for patch size {h}")
            return self
        if L < 1:
            raise ConfigurationError("n_levels must be >= 1")
        if self.z_channels < 1:
            raise ConfigurationError("z_channels must be >= 1")
        v = self.variant
        if v is Variant.VANILLA:
            if k != 0:
                raise ConfigurationError("VANILLA requires n_lc = 0")
            if 2**L > h:
                raise ConfigurationError(f"a {h} px patch supports at most log2({h}) levels, got {L}")
        elif v in (Variant.LC, Variant.LEAN_LC):
            if k != L - 1:
                raise ConfigurationError(f"{v.name} requires n_lc = n_levels - 1 = {L - 1}, got {k}")
            if v is Variant.LEAN_LC and 2**L > h:
                raise ConfigurationError("LEAN_LC top-down sizes need 2**n_levels <= patch_size")
        elif v is Variant.DEEP_LC:
            if not 1 <= k < L:
                raise ConfigurationError(f"DEEP_LC requires 1 <= n_lc < n_levels, got {k}")
            if 2 ** (L - k) > h:
                raise ConfigurationError("too many vanilla levels above the LC levels for this patch size")
        return self

    def replace(self, **changes) -> "ModelConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mode"] = self.mode.value
        d["variant"] = self.variant.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    # per-level layout ----------------------------------------------------

    @property
    def is_variational(self) -> bool:
        return self.mode is Mode.HVAE

    def pads_bu(self, level: int) -> bool:
        """Whether BU block ``level`` (1-based) is zero-padded back to full size."""
        v = self.variant
        if v in (Variant.LC, Variant.LEAN_LC):
            return True
        if v is Variant.DEEP_LC:
            return level <= self.n_lc
        return False

    def crops_td(self, level: int) -> bool:
        """Whether TD block ``level`` center-crops before upsampling."""
        if self.variant is Variant.LC:
            return True
        if self.variant is Variant.DEEP_LC:
            return level <= self.n_lc
        return False

    def bu_size(self, level: int, h: int | None = None) -> int:
        """Spatial side of the BU features at ``level`` (0 = input branch)."""
        s = self.patch_size if h is None else h
        for i in range(1, level + 1):
            s = s if self.pads_bu(i) else s // 2
        return s

    def td_size(self, level: int, h: int | None = None) -> int:
        """Spatial side at which TD block ``level`` holds its latent."""
        h = self.patch_size if h is None else h
        if self.variant is Variant.LEAN_LC:
            return h // 2**level
        return self.bu_size(level, h)

    def bu_scale(self, level: int) -> float:
        if self.variant is Variant.DEEP_LC and self.deep_lc_scaling:
            return (2.0 * level) ** 0.5
        return 1.0
