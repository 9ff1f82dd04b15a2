"""Range-invariant PSNR, SSIM and test-set evaluation."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.ndimage import uniform_filter

PSNR_CAP = 100.0
SSIM_WINDOW = 7
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def affine_fit(gt: np.ndarray, pred: np.ndarray) -> tuple[float, float]:
    """Least-squares (alpha, beta) minimizing ||gt - alpha * pred - beta||^2."""
    gt = np.asarray(gt, dtype=np.float64).ravel()
    pred = np.asarray(pred, dtype=np.float64).ravel()
    pc = pred - pred.mean()
    denom = float(pc @ pc)
    alpha = float((gt - gt.mean()) @ pc) / denom if denom > 0 else 0.0
    beta = float(gt.mean() - alpha * pred.mean())
    return alpha, beta


def psnr_invariant(gt: np.ndarray, pred: np.ndarray) -> float:
    """PSNR after the best affine alignment of ``pred`` to ``gt``; range from ``gt``."""
    gt = np.asarray(gt, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    if gt.shape != pred.shape:
        raise ValueError(f"shape mismatch: {gt.shape} vs {pred.shape}")
    rng = float(gt.max() - gt.min())
    if rng == 0:
        raise ValueError("ground truth is constant; PSNR undefined")
    # fit on the centered prediction so that a * pred + b only rescales pc
    pc = pred - pred.mean()
    denom = float(np.sum(pc * pc))
    gc = gt - gt.mean()
    if denom > 0:
        fitted = pc * (float(np.sum(gc * pc)) / denom)
    else:
        fitted = np.zeros_like(gc)
    mse = float(np.mean((gc - fitted) ** 2))
    if mse < rng**2 * 1e-10:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * np.log10(rng**2 / mse))


def _local_stats(x: np.ndarray, y: np.ndarray, win: int):
    mx = uniform_filter(x, win, mode="reflect")
    my = uniform_filter(y, win, mode="reflect")
    n = win * win
    # unbiased local (co)variances
    cov_norm = n / (n - 1)
    vx = cov_norm * (uniform_filter(x * x, win, mode="reflect") - mx * mx)
    vy = cov_norm * (uniform_filter(y * y, win, mode="reflect") - my * my)
    vxy = cov_norm * (uniform_filter(x * y, win, mode="reflect") - mx * my)
    return mx, my, vx, vy, vxy


def ssim_components(gt, pred, data_range: float | None = None, win: int = SSIM_WINDOW):
    """Luminance and contrast-structure maps, cropped to windows fully inside the image."""
    gt = np.asarray(gt, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    if gt.shape != pred.shape:
        raise ValueError(f"shape mismatch: {gt.shape} vs {pred.shape}")
    if min(gt.shape) < win:
        raise ValueError(f"image {gt.shape} smaller than the {win}x{win} window")
    if data_range is None:
        data_range = float(gt.max() - gt.min())
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    mx, my, vx, vy, vxy = _local_stats(gt, pred, win)
    lum = (2 * mx * my + c1) / (mx**2 + my**2 + c1)
    cs = (2 * vxy + c2) / (vx + vy + c2)
    p = (win - 1) // 2
    inner = (slice(p, -p or None),) * gt.ndim
    return lum[inner], cs[inner]


def ssim(gt, pred, data_range: float | None = None) -> float:
    """Mean SSIM, 7x7 uniform window; dynamic range defaults to ``gt``'s range."""
    gt = np.asarray(gt, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    if data_range is None:
        data_range = float(gt.max() - gt.min())
    lum, cs = ssim_components(gt, pred, data_range)
    return float(np.mean(lum * cs))


@dataclass
class EvalReport:
    rows: list[dict] = field(default_factory=list)

    def _mean(self, key: str) -> float:
        return float(np.mean([r[key] for r in self.rows])) if self.rows else float("nan")

    @property
    def psnr_d1(self) -> float:
        return self._mean("psnr_d1")

    @property
    def psnr_d2(self) -> float:
        return self._mean("psnr_d2")

    @property
    def ssim_d1(self) -> float:
        return self._mean("ssim_d1")

    @property
    def ssim_d2(self) -> float:
        return self._mean("ssim_d2")

    @property
    def psnr(self) -> float:
        return 0.5 * (self.psnr_d1 + self.psnr_d2)

    def aggregate(self) -> dict:
        return {
            "n_images": len(self.rows),
            "psnr_d1": self.psnr_d1,
            "psnr_d2": self.psnr_d2,
            "ssim_d1": self.ssim_d1,
            "ssim_d2": self.ssim_d2,
            "psnr_mean": self.psnr,
        }

    def write(self, csv_path: str | Path, json_path: str | Path | None = None) -> None:
        csv_path = Path(csv_path)
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        fields = ["image", "psnr_d1", "psnr_d2", "ssim_d1", "ssim_d2"]
        with csv_path.open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
            writer.writeheader()
            writer.writerows(self.rows)
        json_path = csv_path.with_suffix(".json") if json_path is None else Path(json_path)
        json_path.write_text(json.dumps(self.aggregate(), indent=2, sort_keys=True) + "\n")


Predictor = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]


def evaluate(model, pairs: Sequence, strategy: str = "inner", pad: int = 24, batch_size: int = 64) -> EvalReport:
    """Per-image metrics on ``pairs`` (ChannelPair objects).

    ``model`` is either a trained network, run through tiled prediction, or
    any callable mapping the superimposed image to ``(mu1, mu2)``.
    """
    from lcsplit.tiling import predict_image

    if len(pairs) == 0:
        raise ValueError("empty evaluation split")
    report = EvalReport()
    for i, pair in enumerate(pairs):
        x = pair.mixed
        if callable(model) and not hasattr(model, "config"):
            mu1, mu2 = model(x)
        else:
            stitched = predict_image(x, model, strategy=strategy, pad=pad, batch_size=batch_size)
            mu1, mu2 = stitched.mu1, stitched.mu2
        report.rows.append(
            {
                "image": pair.name or str(i),
                "psnr_d1": psnr_invariant(pair.d1, mu1),
                "psnr_d2": psnr_invariant(pair.d2, mu2),
                "ssim_d1": ssim(pair.d1, mu1),
                "ssim_d2": ssim(pair.d2, mu2),
            }
        )
    return report
