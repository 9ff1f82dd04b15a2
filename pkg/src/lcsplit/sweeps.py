"""Patch-size and context-depth studies: train, evaluate, tabulate, plot."""
from __future__ import annotations

import csv
import json
import logging
import statistics
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

from lcsplit.datagen import ConfigurationError, PairDataset
from lcsplit.metrics import evaluate
from lcsplit.model import ModelConfig, Mode, Variant, activation_footprint, build, load_checkpoint
from lcsplit.model.checkpoint import CheckpointError
from lcsplit.tiling import DEFAULT_INNER_PAD
from lcsplit.train import TrainConfig, train

log = logging.getLogger(__name__)

ROW_COLUMNS = ("value", "seed", "psnr", "psnr_d1", "psnr_d2", "ssim", "footprint", "best_epoch", "train_seconds")


@dataclass
class SweepTable:
    """Per-(value, seed) rows of a study plus per-value medians."""

    name: str
    rows: list[dict] = field(default_factory=list)

    def values(self) -> list[int]:
        return sorted({r["value"] for r in self.rows})

    def median_psnr(self, value: int) -> float:
        return statistics.median(r["psnr"] for r in self.rows if r["value"] == value)

    def summary(self) -> list[dict]:
        out = []
        for v in self.values():
            sel = [r for r in self.rows if r["value"] == v]
            out.append(
                {
                    "value": v,
                    "n_seeds": len(sel),
                    "median_psnr": statistics.median(r["psnr"] for r in sel),
                    "footprint": sel[0]["footprint"],
                }
            )
        return out

    def write_csv(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=("value", "n_seeds", "median_psnr", "footprint"))
            w.writeheader()
            w.writerows(self.summary())
        with path.with_name(path.stem + "_runs.csv").open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=ROW_COLUMNS, extrasaction="ignore")
            w.writeheader()
            w.writerows(self.rows)
        return path

    def plot(self, path: str | Path, xlabel: str) -> Path:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        summ = self.summary()
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        ax.plot([s["value"] for s in summ], [s["median_psnr"] for s in summ], "o-")
        for r in self.rows:
            ax.plot(r["value"], r["psnr"], ".", color="0.6")
        ax.set_xlabel(xlabel)
        ax.set_ylabel("test PSNR (dB)")
        ax.set_title(self.name)
        fig.tight_layout()
        path = Path(path)
        fig.savefig(path, dpi=120)
        plt.close(fig)
        return path


def lc_level_config(base: ModelConfig, k: int) -> ModelConfig:
    """Config with ``k`` context inputs on ``base``'s hierarchy.

    ``k = 0`` is the vanilla model, ``k = n_levels - 1`` full lateral context
    and anything in between a deep variant with vanilla levels on top.
    """
    L = base.n_levels
    if not 0 <= k < L:
        raise ConfigurationError(f"k must be in [0, {L - 1}] for a {L}-level model, got {k}")
    if k == 0:
        variant = Variant.VANILLA
    elif k == L - 1:
        variant = Variant.LC
    else:
        variant = Variant.DEEP_LC
    return base.replace(variant=variant, n_lc=k).validate()


def eval_pad(h: int) -> int:
    """Inner pad used to evaluate an ``h`` px model: 24 at 64 px, scaled for others."""
    return DEFAULT_INNER_PAD * h // 64


def _stamp(tcfg: TrainConfig, dataset: PairDataset) -> dict:
    return {"train_config": tcfg.to_dict(), "dataset": dataset.fingerprint()}


def train_and_score(cfg: ModelConfig, dataset: PairDataset, tcfg: TrainConfig, run_dir: str | Path | None = None,
                    reuse: bool = False) -> tuple[object, dict]:
    """Train one model (or reuse a matching checkpoint) and score it on the test split.

    Returns ``(model, row)`` with the row holding PSNR, SSIM and footprint.
    """
    run_dir = Path(run_dir) if run_dir is not None else None
    model, best_epoch, seconds = None, None, None
    ckpt = run_dir / "best.pt" if run_dir is not None else None
    if reuse and ckpt is not None and ckpt.exists():
        try:
            model, extra = load_checkpoint(ckpt, expected=cfg)
            stamp = json.loads((run_dir / "run.json").read_text())
            if stamp == _stamp(tcfg, dataset):
                best_epoch = extra.get("best_epoch")
                timing = run_dir / "timing.json"
                if timing.exists():
                    seconds = json.loads(timing.read_text())["train_seconds"]
                log.info("reusing %s", ckpt)
            else:
                model = None
        except (CheckpointError, OSError, ValueError):
            model = None
    if model is None:
        model = build(cfg)
        t0 = time.perf_counter()
        result = train(model, dataset, tcfg, out_dir=run_dir)
        seconds = time.perf_counter() - t0
        best_epoch = result.best_epoch
        if run_dir is not None:
            (run_dir / "run.json").write_text(json.dumps(_stamp(tcfg, dataset), sort_keys=True) + "\n")
            (run_dir / "timing.json").write_text(json.dumps({"train_seconds": seconds}) + "\n")
    test = dataset.subset("test")
    report = evaluate(model, test, strategy="inner", pad=eval_pad(cfg.patch_size))
    agg = report.aggregate()
    row = {
        "psnr": report.psnr,
        "psnr_d1": agg["psnr_d1"],
        "psnr_d2": agg["psnr_d2"],
        "ssim": 0.5 * (agg["ssim_d1"] + agg["ssim_d2"]),
        "footprint": activation_footprint(cfg),
        "best_epoch": best_epoch,
        "train_seconds": seconds,
    }
    if run_dir is not None:
        (run_dir / "score.json").write_text(json.dumps(row, indent=2, sort_keys=True) + "\n")
    return model, row


def _run(name: str, configs: dict[int, ModelConfig], dataset: PairDataset, tcfg: TrainConfig,
         seeds: Sequence[int], out_dir, reuse: bool) -> SweepTable:
    table = SweepTable(name)
    out_dir = Path(out_dir) if out_dir is not None else None
    for value, cfg in configs.items():
        for seed in seeds:
            run_dir = out_dir / f"{value}_seed{seed}" if out_dir is not None else None
            _, row = train_and_score(
                cfg.replace(seed=seed), dataset, _seeded(tcfg, seed, cfg.patch_size), run_dir, reuse
            )
            row.update(value=value, seed=seed)
            log.info("%s value %s seed %s psnr %.2f", name, value, seed, row["psnr"])
            table.rows.append(row)
    return table


def _seeded(tcfg: TrainConfig, seed: int, h: int) -> TrainConfig:
    return replace(tcfg, seed=seed, patch_size=h)


def sweep_lc_levels(base_config: ModelConfig, k_values: Sequence[int], dataset: PairDataset, tcfg: TrainConfig,
                    seeds: Sequence[int] = (0,), out_dir: str | Path | None = None, reuse: bool = False) -> SweepTable:
    """Train one model per context depth ``k`` (and seed) at ``base_config``'s patch size."""
    if base_config.mode is Mode.UNET_BASELINE:
        raise ConfigurationError("context sweeps need a hierarchical model")
    configs = {k: lc_level_config(base_config, k) for k in k_values}
    table = _run("lc-levels", configs, dataset, tcfg, seeds, out_dir, reuse)
    if out_dir is not None:
        table.write_csv(Path(out_dir) / "lc_levels.csv")
        table.plot(Path(out_dir) / "lc_levels.png", "context inputs k")
    return table


def sweep_patch_size(base_config: ModelConfig, sizes: Sequence[int], dataset: PairDataset, tcfg: TrainConfig,
                     seeds: Sequence[int] = (0,), out_dir: str | Path | None = None,
                     reuse: bool = False) -> SweepTable:
    """Train one model per patch size (and seed) under the same step budget."""
    side = min(min(p.d1.shape) for p in dataset.pairs)
    configs = {}
    for s in sizes:
        if s & (s - 1) or s < 16:
            raise ConfigurationError(f"patch size must be a power of two >= 16, got {s}")
        if s > side:
            raise ConfigurationError(f"patch size {s} exceeds the image side {side}")
        configs[s] = base_config.replace(patch_size=s).validate()
    table = _run("patch-size", configs, dataset, tcfg, seeds, out_dir, reuse)
    if out_dir is not None:
        table.write_csv(Path(out_dir) / "patch_size.csv")
        table.plot(Path(out_dir) / "patch_size.png", "patch size (px)")
    return table
