"""Tiled whole-image prediction with inner, outer or no padding.

* ``NONE``  - tiles of the training size ``h`` laid edge to edge.
* ``INNER`` - tiles of size ``h`` with stride ``h - 2 pad``; only the central
  ``(h - 2 pad)`` core of each prediction is kept.
* ``OUTER`` - windows of ``h + 2 pad`` are fed and the central ``h`` kept.

Keep-regions partition the image exactly.  Tiles hanging over the image edge
read mirrored pixels, and lateral context is always cropped from the full
image so it crosses tile borders.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
import torch

from lcsplit.datagen import ConfigurationError
from lcsplit.model.footprint import receptive_field  # noqa: F401  (re-export)
from lcsplit.pyramid import stack_array

DEFAULT_INNER_PAD = 24
PAD_GRID = (8, 16, 24, 28)


class Strategy(str, enum.Enum):
    INNER = "inner"
    OUTER = "outer"
    NONE = "none"


@dataclass(frozen=True)
class Tile:
    center: tuple[int, int]  # window center in image coordinates
    keep: tuple[int, int, int, int]  # (r0, r1, c0, c1) written to the output
    offset: tuple[int, int]  # position of keep[r0, c0] inside the fed window


@dataclass
class TilingPlan:
    strategy: Strategy
    h: int
    pad: int
    stride: int
    window: int
    image_dims: tuple[int, int]
    padded_canvas: tuple[int, int]
    grid: tuple[int, int]
    tiles: list[Tile] = field(default_factory=list)

    @property
    def n_tiles(self) -> int:
        return len(self.tiles)

    def boundaries(self) -> tuple[list[int], list[int]]:
        """Interior row and column indices at which a new keep-region starts."""
        rows = sorted({t.keep[0] for t in self.tiles} - {0})
        cols = sorted({t.keep[2] for t in self.tiles} - {0})
        return rows, cols


def plan_tiles(image_dims: tuple[int, int], strategy: Strategy | str, h: int, pad: int = 0) -> TilingPlan:
    strategy = Strategy(strategy)
    H, W = image_dims
    if strategy is Strategy.INNER:
        if not 0 < 2 * pad < h:
            raise ConfigurationError(f"INNER needs 0 < 2*pad < h, got pad={pad}, h={h}")
        stride, window, lead = h - 2 * pad, h, pad
    elif strategy is Strategy.NONE:
        if pad != 0:
            raise ConfigurationError("NONE strategy takes pad = 0")
        stride, window, lead = h, h, 0
    else:
        if pad < 0:
            raise ConfigurationError("OUTER needs pad >= 0")
        stride, window, lead = h, h + 2 * pad, pad
    nr, nc = math.ceil(H / stride), math.ceil(W / stride)
    tiles = []
    for i in range(nr):
        for j in range(nc):
            r0, c0 = i * stride, j * stride
            top, left = r0 - lead, c0 - lead
            tiles.append(
                Tile(
                    center=(top + window // 2, left + window // 2),
                    keep=(r0, min(r0 + stride, H), c0, min(c0 + stride, W)),
                    offset=(lead, lead),
                )
            )
    canvas = (nr * stride + 2 * lead, nc * stride + 2 * lead)
    return TilingPlan(strategy, h, pad, stride, window, (H, W), canvas, (nr, nc), tiles)


@dataclass
class StitchedPrediction:
    mu1: np.ndarray
    mu2: np.ndarray
    plan: TilingPlan
    write_count: np.ndarray | None = None


def _model_dtype(model) -> torch.dtype:
    return next(model.parameters()).dtype


def predict_tiled(image: np.ndarray, model, plan: TilingPlan, batch_size: int = 64) -> StitchedPrediction:
    """Run ``model`` on every tile of ``plan`` and stitch the keep-regions."""
    image = np.asarray(image, dtype=np.float32)
    if image.shape != plan.image_dims:
        raise ValueError(f"image {image.shape} does not match plan {plan.image_dims}")
    if plan.strategy is not Strategy.OUTER and plan.h != model.config.patch_size:
        raise ConfigurationError(f"plan patch {plan.h} != model patch {model.config.patch_size}")
    n_lc = model.n_lc
    xm, xs, m1, s1, m2, s2 = model.normalization.as_tuple()
    dtype = _model_dtype(model)
    out = np.zeros((2, *plan.image_dims), dtype=np.float32)
    count = np.zeros(plan.image_dims, dtype=np.int32)
    was_training = model.training
    model.eval()
    try:
        for b0 in range(0, plan.n_tiles, batch_size):
            batch = plan.tiles[b0 : b0 + batch_size]
            stacks = np.stack([stack_array(image, t.center, plan.window, n_lc) for t in batch])
            x = torch.from_numpy((stacks - xm) / xs).to(dtype)
            with torch.no_grad():
                pred, _ = model(x)
            mu = torch.cat([pred.mu1, pred.mu2], dim=1).float().numpy()
            for t, m in zip(batch, mu):
                r0, r1, c0, c1 = t.keep
                orow, ocol = t.offset
                out[:, r0:r1, c0:c1] = m[:, orow : orow + r1 - r0, ocol : ocol + c1 - c0]
                count[r0:r1, c0:c1] += 1
    finally:
        model.train(was_training)
    out[0] = out[0] * s1 + m1
    out[1] = out[1] * s2 + m2
    return StitchedPrediction(out[0], out[1], plan, count)


def predict_image(image: np.ndarray, model, strategy: Strategy | str = Strategy.INNER, pad: int | None = None,
                  batch_size: int = 64) -> StitchedPrediction:
    strategy = Strategy(strategy)
    if pad is None:
        pad = 0 if strategy is Strategy.NONE else DEFAULT_INNER_PAD
    if strategy is Strategy.NONE:
        pad = 0
    plan = plan_tiles(np.shape(image), strategy, model.config.patch_size, pad)
    return predict_tiled(image, model, plan, batch_size)


# seam measurement ------------------------------------------------------------


def _line_jumps(img: np.ndarray, axis: int) -> np.ndarray:
    """|jump across line k| minus the mean of its neighbouring steps, for k = 2..n-2.

    Entry ``k - 2`` belongs to the line between pixel ``k - 1`` and ``k``.
    """
    d = np.diff(img, axis=axis)  # d[k-1] = img[k] - img[k-1]
    n = d.shape[axis]
    take = lambda a, b: np.take(d, np.arange(a, n + b), axis=axis)  # noqa: E731
    across = take(1, -1)
    neighbours = 0.5 * (take(0, -2) + take(2, 0))
    return np.abs(across - neighbours)


def seam_score_array(img: np.ndarray, row_lines, col_lines) -> float:
    """Mean jump residual on the given lines over the mean on interior lines.

    ``row_lines``/``col_lines`` are indices ``k`` of lines between pixel
    ``k - 1`` and ``k``.  Lines directly next to a given line also see part
    of its jump and are left out of the reference set.  A value near 1 means
    the lines are unremarkable.
    """
    img = np.asarray(img, dtype=np.float64)
    on, off = [], []
    for axis, lines in ((0, row_lines), (1, col_lines)):
        jumps = _line_jumps(img, axis)
        n = img.shape[axis]
        ks = np.arange(2, n - 1)
        lines = np.asarray(list(lines), dtype=int)
        mask = np.isin(ks, lines)
        near = np.isin(ks, np.concatenate([lines - 1, lines + 1])) & ~mask
        per_line = jumps.mean(axis=1 - axis)
        on.append(per_line[mask])
        off.append(per_line[~mask & ~near])
    on_v, off_v = np.concatenate(on), np.concatenate(off)
    if on_v.size == 0:
        return 1.0
    denom = off_v.mean()
    if denom == 0:
        return float("inf") if on_v.mean() > 0 else 1.0
    return float(on_v.mean() / denom)


def seam_score(pred: StitchedPrediction) -> float:
    """Seam score of both channels along the plan's keep-region boundaries."""
    rows, cols = pred.plan.boundaries()
    return float(np.mean([seam_score_array(m, rows, cols) for m in (pred.mu1, pred.mu2)]))


# padding benchmark -----------------------------------------------------------


def padding_benchmark(model, pairs, pad: int = DEFAULT_INNER_PAD, strategies=(Strategy.INNER, Strategy.OUTER,
                      Strategy.NONE), inner_pads=None, batch_size: int = 64) -> list[dict]:
    """One row per strategy (and per inner pad) with tile count, PSNR, SSIM and seam score.

    Metrics are means over ``pairs``; ``n_tiles`` is summed over them.
    """
    from lcsplit.metrics import psnr_invariant, ssim

    if len(pairs) == 0:
        raise ValueError("no images to benchmark")
    runs = []
    for s in map(Strategy, strategies):
        if s is Strategy.INNER:
            runs += [(s, p) for p in (inner_pads or (pad,))]
        else:
            runs.append((s, 0 if s is Strategy.NONE else pad))
    rows = []
    for s, p in runs:
        n_tiles, psnrs, ssims, seams = 0, [], [], []
        for pair in pairs:
            pred = predict_image(pair.mixed, model, s, pad=p, batch_size=batch_size)
            n_tiles += pred.plan.n_tiles
            psnrs.append(0.5 * (psnr_invariant(pair.d1, pred.mu1) + psnr_invariant(pair.d2, pred.mu2)))
            ssims.append(0.5 * (ssim(pair.d1, pred.mu1) + ssim(pair.d2, pred.mu2)))
            seams.append(seam_score(pred))
        rows.append(
            {
                "strategy": s.value,
                "pad": p,
                "n_tiles": n_tiles,
                "psnr": float(np.mean(psnrs)),
                "ssim": float(np.mean(ssims)),
                "seam_score": float(np.mean(seams)),
            }
        )
    return rows
