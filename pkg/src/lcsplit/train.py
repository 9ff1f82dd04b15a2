"""Seeded training loop: random patch batches, Adam, plateau LR halving, early stopping."""
from __future__ import annotations

import contextlib
import copy
import csv
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from lcsplit.datagen import ChannelPair, PairDataset
from lcsplit.loss import LossReport, elbo_loss, kl_weight_schedule, mse_loss
from lcsplit.model import Mode, save_checkpoint
from lcsplit.pyramid import crop, stack_array

log = logging.getLogger(__name__)

LOG_COLUMNS = ("epoch", "train_total", "val_total", "recon_d1", "recon_d2", "kl_sum", "lr")


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    batch_size: int = 32
    patch_size: int = 64
    max_epochs: int = 400
    lr: float = 1e-3
    lr_patience: int = 30
    lr_factor: float = 0.5
    early_stop_patience: int = 200
    steps_per_epoch: int | None = None
    seed: int = 0
    precision: str = "32"
    kl_warmup_epochs: int = 0

    def validate(self) -> "TrainConfig":
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.precision not in ("32", "mixed"):
            raise ValueError(f"precision must be '32' or 'mixed', got {self.precision!r}")
        return self

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainResult:
    model: torch.nn.Module
    history: list[dict] = field(default_factory=list)
    best_epoch: int = 0
    best_val: float = math.inf
    checkpoint: Path | None = None


def normalization_stats(pairs: Sequence[ChannelPair]) -> tuple[float, ...]:
    def ms(arrs):
        flat = np.concatenate([a.ravel() for a in arrs]).astype(np.float64)
        return float(flat.mean()), float(flat.std()) or 1.0

    return (*ms([p.mixed for p in pairs]), *ms([p.d1 for p in pairs]), *ms([p.d2 for p in pairs]))


def default_steps_per_epoch(pairs: Sequence[ChannelPair], batch_size: int, h: int) -> int:
    pixels = sum(p.d1.size for p in pairs)
    return max(1, math.ceil(pixels / (batch_size * h * h)))


class PatchSampler:
    """Random training batches, a pure function of ``(seed, epoch, batch)``."""

    def __init__(self, pairs: Sequence[ChannelPair], h: int, n_lc: int, seed: int):
        self.pairs = list(pairs)
        self.mixed = [p.mixed for p in self.pairs]
        self.h = h
        self.n_lc = n_lc
        self.seed = seed

    def centers(self, epoch: int, batch: int, batch_size: int) -> list[tuple[int, int, int]]:
        rng = np.random.default_rng([self.seed, epoch, batch])
        out = []
        for _ in range(batch_size):
            i = int(rng.integers(len(self.pairs)))
            H, W = self.pairs[i].d1.shape
            out.append((i, int(rng.integers(H)), int(rng.integers(W))))
        return out

    def batch(self, epoch: int, batch: int, batch_size: int):
        picks = self.centers(epoch, batch, batch_size)
        return self.assemble(picks), picks

    def assemble(self, picks):
        xs, d1s, d2s = [], [], []
        for i, r, c in picks:
            xs.append(stack_array(self.mixed[i], (r, c), self.h, self.n_lc))
            d1s.append(crop(self.pairs[i].d1, (r, c), self.h))
            d2s.append(crop(self.pairs[i].d2, (r, c), self.h))
        return np.stack(xs), np.stack(d1s)[:, None], np.stack(d2s)[:, None]


def validation_picks(pairs: Sequence[ChannelPair], h: int) -> list[tuple[int, int, int]]:
    """Centers of a stride-``h`` grid covering every image completely."""
    picks = []
    for i, p in enumerate(pairs):
        H, W = p.d1.shape
        for r in range(math.ceil(H / h)):
            for c in range(math.ceil(W / h)):
                picks.append((i, r * h + h // 2, c * h + h // 2))
    return picks


def _to_tensor(a: np.ndarray, mean: float, std: float, dtype) -> torch.Tensor:
    return torch.from_numpy(((a - mean) / std).astype(np.float32)).to(dtype)


def compute_loss(model, x, d1, d2, kl_weight: float = 1.0, stochastic: bool | None = None) -> LossReport:
    pred, latents = model(x, stochastic=stochastic)
    if model.config.mode is Mode.HVAE:
        return elbo_loss(pred, d1, d2, latents, kl_weight)
    return mse_loss(pred, d1, d2)


def _batch_tensors(model, arrays):
    xm, xs, m1, s1, m2, s2 = model.normalization.as_tuple()
    dtype = next(model.parameters()).dtype
    x, d1, d2 = arrays
    return _to_tensor(x, xm, xs, dtype), _to_tensor(d1, m1, s1, dtype), _to_tensor(d2, m2, s2, dtype)


def validate(model, pairs: Sequence[ChannelPair], tcfg: TrainConfig | None = None, batch_size: int = 64) -> float:
    """Mean eval-mode loss over a deterministic grid of patches."""
    if len(pairs) == 0:
        raise ValueError("empty validation split")
    h = model.config.patch_size
    sampler = PatchSampler(pairs, h, model.n_lc, seed=0)
    picks = validation_picks(pairs, h)
    was_training = model.training
    model.eval()
    total, n = 0.0, 0
    try:
        with torch.no_grad():
            for b0 in range(0, len(picks), batch_size):
                chunk = picks[b0 : b0 + batch_size]
                x, d1, d2 = _batch_tensors(model, sampler.assemble(chunk))
                report = compute_loss(model, x, d1, d2, stochastic=False)
                total += float(report.total) * len(chunk)
                n += len(chunk)
    finally:
        model.train(was_training)
    return total / n


def _param_norm(model) -> float:
    return float(torch.sqrt(sum((p.detach().double() ** 2).sum() for p in model.parameters())))


def train(model, dataset: PairDataset, tcfg: TrainConfig, out_dir: str | Path | None = None,
          epoch_callback=None) -> TrainResult:
    """Train ``model`` on ``dataset``'s train split, selecting on the val split.

    The returned model carries the best-validation weights; with ``out_dir``
    a checkpoint ``best.pt`` and a CSV log ``train_log.csv`` are written.
    """
    tcfg.validate()
    if model.config.patch_size != tcfg.patch_size:
        raise ValueError(f"model patch size {model.config.patch_size} != train patch size {tcfg.patch_size}")
    train_pairs = dataset.subset("train")
    val_pairs = dataset.subset("val")
    if not train_pairs:
        raise ValueError("empty training split")
    h = tcfg.patch_size
    model.normalization.set(*normalization_stats(train_pairs))
    if hasattr(model, "reseed"):
        model.reseed(tcfg.seed + 7919)
    steps = tcfg.steps_per_epoch or default_steps_per_epoch(train_pairs, tcfg.batch_size, h)
    sampler = PatchSampler(train_pairs, h, model.n_lc, tcfg.seed)
    opt = torch.optim.Adam(model.parameters(), lr=tcfg.lr)
    sched = torch.optim.lr_scheduler.ReduceLROnPlateau(opt, mode="min", factor=tcfg.lr_factor,
                                                       patience=tcfg.lr_patience)
    autocast = (
        (lambda: torch.autocast("cpu", dtype=torch.bfloat16))
        if tcfg.precision == "mixed"
        else contextlib.nullcontext
    )
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    result = TrainResult(model=model)
    best_state = copy.deepcopy(model.state_dict())
    since_best = 0
    for epoch in range(tcfg.max_epochs):
        model.train()
        kl_w = kl_weight_schedule(epoch, tcfg.kl_warmup_epochs)
        sums = {"total": 0.0, "recon_d1": 0.0, "recon_d2": 0.0, "kl_sum": 0.0}
        for b in range(steps):
            arrays, picks = sampler.batch(epoch, b, tcfg.batch_size)
            x, d1, d2 = _batch_tensors(model, arrays)
            try:
                with autocast():
                    report = compute_loss(model, x, d1, d2, kl_weight=kl_w)
                finite = bool(torch.isfinite(report.total))
            except ValueError:
                # the losses refuse non-finite network outputs
                finite = False
            if not finite:
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch} batch {b}; images/centers {picks[:8]}...; "
                    f"parameter norm {_param_norm(model):.4g}"
                )
            opt.zero_grad(set_to_none=True)
            report.total.backward()
            opt.step()
            for k, v in report.as_row().items():
                sums[k] += v
        row = {k: v / steps for k, v in sums.items()}
        val = validate(model, val_pairs) if val_pairs else row["total"]
        lr = opt.param_groups[0]["lr"]
        entry = {
            "epoch": epoch,
            "train_total": row["total"],
            "val_total": val,
            "recon_d1": row["recon_d1"],
            "recon_d2": row["recon_d2"],
            "kl_sum": row["kl_sum"],
            "lr": lr,
        }
        result.history.append(entry)
        log.info("epoch %d train %.4f val %.4f lr %.2e", epoch, row["total"], val, lr)
        if epoch_callback is not None:
            epoch_callback(entry)
        if val < result.best_val:
            result.best_val, result.best_epoch = val, epoch
            best_state = copy.deepcopy(model.state_dict())
            since_best = 0
        else:
            since_best += 1
        sched.step(val)
        if since_best >= tcfg.early_stop_patience:
            log.info("early stop after epoch %d (best %d)", epoch, result.best_epoch)
            break
    model.load_state_dict(best_state)
    model.eval()
    if out_dir is not None:
        write_log(result.history, out_dir / "train_log.csv")
        result.checkpoint = save_checkpoint(
            out_dir / "best.pt", model, {"best_epoch": result.best_epoch, "best_val": result.best_val,
                                        "train_config": tcfg.to_dict()}
        )
    return result


def write_log(history: Sequence[dict], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=LOG_COLUMNS)
        writer.writeheader()
        for row in history:
            writer.writerow({k: row[k] for k in LOG_COLUMNS})
