"""Primary patches and their lateral-context stacks.

Crops falling outside the image are filled by mirror reflection (edge pixel
repeated, as ``np.pad(mode="symmetric")``).  Reflection is done through index
arithmetic, so large out-of-bounds crops never materialize a padded copy.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PatchSpec:
    center: tuple[int, int]
    size: int

    def __post_init__(self):
        h = self.size
        if h < 16 or h & (h - 1):
            raise ValueError(f"patch size must be a power of two >= 16, got {h}")


@dataclass
class LCStack:
    primary: np.ndarray
    contexts: list[np.ndarray]

    @property
    def n_lc(self) -> int:
        return len(self.contexts)

    def as_array(self) -> np.ndarray:
        """(1 + n_lc, h, h) array, primary first."""
        return np.stack([self.primary, *self.contexts])


def _mirror_index(idx: np.ndarray, n: int) -> np.ndarray:
    m = np.mod(idx, 2 * n)
    return np.where(m < n, m, 2 * n - 1 - m)


def crop(x: np.ndarray, center: tuple[int, int], size: int) -> np.ndarray:
    """``size``x``size`` window whose top-left is ``center - size // 2``."""
    x = np.asarray(x)
    if size > 4 * max(x.shape):
        raise ValueError(f"crop of {size} px exceeds 4x the image side {x.shape}")
    r0 = center[0] - size // 2
    c0 = center[1] - size // 2
    rows = _mirror_index(np.arange(r0, r0 + size), x.shape[0])
    cols = _mirror_index(np.arange(c0, c0 + size), x.shape[1])
    return x[np.ix_(rows, cols)]


def extract_patch(x: np.ndarray, spec: PatchSpec) -> np.ndarray:
    return crop(x, spec.center, spec.size)


def downsample_by(img: np.ndarray, factor: int) -> np.ndarray:
    """Non-overlapping ``factor``x``factor`` block means."""
    img = np.asarray(img)
    if factor < 1 or factor & (factor - 1):
        raise ValueError(f"factor must be a power of two, got {factor}")
    h, w = img.shape[-2:]
    if h % factor or w % factor:
        raise ValueError(f"shape {img.shape} not divisible by {factor}")
    if factor == 1:
        return img.copy()
    blocks = img.reshape(*img.shape[:-2], h // factor, factor, w // factor, factor)
    return blocks.mean(axis=(-3, -1), dtype=np.float64).astype(img.dtype)


def build_lc_stack(x: np.ndarray, spec: PatchSpec, n_lc: int) -> LCStack:
    """Primary patch plus ``n_lc`` context crops, each downsampled to ``h``x``h``.

    ``contexts[k]`` covers a ``2**(k+1) * h`` window around the same center.
    """
    if n_lc < 0:
        raise ValueError("n_lc must be non-negative")
    h = spec.size
    if (2**n_lc) * h > 4 * max(np.shape(x)):
        raise ValueError(f"n_lc={n_lc} needs a {(2**n_lc) * h} px context, too large for image {np.shape(x)}")
    primary = crop(x, spec.center, h)
    contexts = []
    for k in range(n_lc):
        f = 2 ** (k + 1)
        contexts.append(downsample_by(crop(x, spec.center, f * h), f))
    return LCStack(primary, contexts)


def stack_array(x: np.ndarray, center: tuple[int, int], h: int, n_lc: int) -> np.ndarray:
    """Shortcut for ``build_lc_stack(...).as_array()`` without the size check on h."""
    layers = [crop(x, center, h)]
    for k in range(n_lc):
        f = 2 ** (k + 1)
        layers.append(downsample_by(crop(x, center, f * h), f))
    return np.stack(layers)
