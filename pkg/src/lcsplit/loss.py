"""Training objectives: the two-headed Gaussian ELBO and a plain MSE.

All reductions are per-pixel means so losses compare across patch sizes.
Functions accept torch tensors (differentiable) or numpy arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

import torch

if TYPE_CHECKING:  # pragma: no cover
    from lcsplit.model.network import LatentState, Prediction

LOG_SIGMA_FLOOR = -5.0
HALF_LOG_2PI = 0.5 * math.log(2 * math.pi)


def _t(x) -> torch.Tensor:
    return x if isinstance(x, torch.Tensor) else torch.as_tensor(x, dtype=torch.float64)


@dataclass
class LossReport:
    total: torch.Tensor
    recon_d1: torch.Tensor
    recon_d2: torch.Tensor
    kl_per_level: list[torch.Tensor] = field(default_factory=list)
    kl_weight: float = 1.0

    @property
    def kl_sum(self) -> float:
        return float(sum(float(k.detach()) for k in self.kl_per_level))

    def as_row(self) -> dict[str, float]:
        return {
            "total": float(self.total.detach()),
            "recon_d1": float(self.recon_d1.detach()),
            "recon_d2": float(self.recon_d2.detach()),
            "kl_sum": self.kl_sum,
        }


def gaussian_nll(mu, logvar, target) -> torch.Tensor:
    """Mean per-pixel Gaussian negative log-likelihood with sigma floored at exp(-5)."""
    mu, logvar, target = _t(mu), _t(logvar), _t(target)
    if mu.shape != target.shape or logvar.shape != target.shape:
        raise ValueError(f"shape mismatch: {tuple(mu.shape)}, {tuple(logvar.shape)}, {tuple(target.shape)}")
    if not (torch.isfinite(mu).all() and torch.isfinite(logvar).all() and torch.isfinite(target).all()):
        raise ValueError("non-finite input to gaussian_nll")
    log_sigma = torch.clamp(0.5 * logvar, min=LOG_SIGMA_FLOOR)
    sq = (target - mu) ** 2 * torch.exp(-2.0 * log_sigma)
    return (HALF_LOG_2PI + log_sigma + 0.5 * sq).mean()


def gaussian_kl_map(mu_q, sigma_q, mu_p, sigma_p) -> torch.Tensor:
    """Elementwise KL(N(mu_q, sigma_q^2) || N(mu_p, sigma_p^2))."""
    mu_q, sigma_q, mu_p, sigma_p = map(_t, (mu_q, sigma_q, mu_p, sigma_p))
    return (
        torch.log(sigma_p / sigma_q)
        + (sigma_q**2 + (mu_q - mu_p) ** 2) / (2.0 * sigma_p**2)
        - 0.5
    )


def gaussian_kl(mu_q, sigma_q, mu_p, sigma_p) -> torch.Tensor:
    """Diagonal-Gaussian KL summed over the channel axis, averaged over the rest.

    Arrays with at least three dimensions are read as (..., C, H, W); lower
    rank inputs have no channel axis and are plainly averaged.
    """
    kl = gaussian_kl_map(mu_q, sigma_q, mu_p, sigma_p)
    if kl.dim() >= 3:
        kl = kl.sum(dim=-3)
    return kl.mean()


def elbo_loss(pred: "Prediction", d1, d2, latents: "LatentState", kl_weight: float = 1.0) -> LossReport:
    """Negative ELBO per pixel: NLL of both channels plus weighted KL of every level."""
    if pred.logvar1 is None:
        raise ValueError("prediction carries no variance head; use mse_loss")
    r1 = gaussian_nll(pred.mu1, pred.logvar1, d1)
    r2 = gaussian_nll(pred.mu2, pred.logvar2, d2)
    kls = [lvl.kl for lvl in latents.levels] if latents is not None else []
    total = r1 + r2
    if kls:
        total = total + kl_weight * torch.stack([_t(k).to(total.dtype) for k in kls]).sum()
    return LossReport(total, r1, r2, kls, kl_weight)


def mse_loss(pred: "Prediction", d1, d2) -> LossReport:
    d1, d2 = _t(d1), _t(d2)
    r1 = ((_t(pred.mu1) - d1) ** 2).mean()
    r2 = ((_t(pred.mu2) - d2) ** 2).mean()
    return LossReport(r1 + r2, r1, r2, [], 0.0)


def kl_weight_schedule(epoch: int, warmup_epochs: int = 0) -> float:
    """Constant 1, or a linear ramp over the first ``warmup_epochs`` epochs."""
    if warmup_epochs <= 0:
        return 1.0
    return min(1.0, (epoch + 1) / warmup_epochs)


def sum_reports(reports: Sequence[LossReport]) -> dict[str, float]:
    """Average the scalar fields of several reports."""
    n = len(reports)
    rows = [r.as_row() for r in reports]
    return {k: sum(r[k] for r in rows) / n for k in rows[0]} if n else {}
