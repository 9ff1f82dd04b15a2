"""Run configuration: built-in defaults, then a TOML file, then command-line flags.

The key set is flat.  ``seed`` seeds data generation, weight init and patch
sampling alike, and ``patch_size`` is shared by model and trainer.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping

import tomli
import tomli_w

from lcsplit.datagen import ConfigurationError, CritterParams
from lcsplit.model import ModelConfig
from lcsplit.train import TrainConfig

CONFIG_NAME = "run_config.toml"


@dataclass
class RunConfig:
    # model
    mode: str = "hvae"
    variant: str = "vanilla"
    n_levels: int = 3
    n_lc: int = 0
    patch_size: int = 64
    base_channels: int = 32
    res_blocks_per_block: int = 1
    z_channels: int = 32
    deep_lc_scaling: bool = True
    # training
    batch_size: int = 32
    max_epochs: int = 400
    lr: float = 1e-3
    lr_patience: int = 30
    lr_factor: float = 0.5
    early_stop_patience: int = 200
    steps_per_epoch: int = 0  # 0 = derived from the training pixel count
    precision: str = "32"
    kl_warmup_epochs: int = 0
    seed: int = 0
    # synthetic data
    canvas_size: int = 128
    n_join: int = 25
    count: int = 200
    strokes_per_channel: int = 6
    stroke_len: int = 80
    stroke_width: float = 3.0
    # paths
    data: str = ""
    out: str = ""

    @classmethod
    def keys(cls) -> set[str]:
        return {f.name for f in fields(cls)}

    @classmethod
    def layered(cls, file: str | Path | None = None, overrides: Mapping[str, Any] | None = None) -> "RunConfig":
        """Defaults, updated by ``file`` (TOML), updated by non-None ``overrides``."""
        cfg = cls()
        if file is not None:
            cfg = cfg.updated(load_toml(file))
        if overrides:
            cfg = cfg.updated({k: v for k, v in overrides.items() if v is not None})
        return cfg

    def updated(self, values: Mapping[str, Any]) -> "RunConfig":
        unknown = set(values) - self.keys()
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        typed = {}
        for f in fields(self):
            if f.name in values:
                typed[f.name] = _coerce(f.name, type(getattr(self, f.name)), values[f.name])
        return dataclasses.replace(self, **typed)

    def model_config(self) -> ModelConfig:
        cfg = ModelConfig(
            mode=self.mode,
            variant=self.variant,
            n_levels=self.n_levels,
            n_lc=self.n_lc,
            patch_size=self.patch_size,
            base_channels=self.base_channels,
            res_blocks_per_block=self.res_blocks_per_block,
            z_channels=self.z_channels,
            seed=self.seed,
            deep_lc_scaling=self.deep_lc_scaling,
        )
        cfg.validate()
        return cfg

    def train_config(self) -> TrainConfig:
        cfg = TrainConfig(
            batch_size=self.batch_size,
            patch_size=self.patch_size,
            max_epochs=self.max_epochs,
            lr=self.lr,
            lr_patience=self.lr_patience,
            lr_factor=self.lr_factor,
            early_stop_patience=self.early_stop_patience,
            steps_per_epoch=self.steps_per_epoch or None,
            seed=self.seed,
            precision=self.precision,
            kl_warmup_epochs=self.kl_warmup_epochs,
        )
        cfg.validate()
        return cfg

    def critter_params(self) -> CritterParams:
        cfg = CritterParams(
            canvas_size=self.canvas_size,
            n_join=self.n_join,
            strokes_per_channel=self.strokes_per_channel,
            stroke_len=self.stroke_len,
            stroke_width=self.stroke_width,
            seed=self.seed,
        )
        cfg.validate()
        return cfg

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def dump(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(tomli_w.dumps(self.to_dict()).encode())
        return path


def _coerce(name: str, kind: type, value: Any) -> Any:
    if kind is bool:
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "false", "1", "0"):
            return value.lower() in ("true", "1")
        raise ConfigurationError(f"{name}: expected a boolean, got {value!r}")
    if kind is int and isinstance(value, float) and not value.is_integer():
        raise ConfigurationError(f"{name}: expected an integer, got {value!r}")
    try:
        return kind(value)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"{name}: cannot read {value!r} as {kind.__name__}") from exc


def load_toml(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        data = tomli.loads(path.read_text())
    except tomli.TOMLDecodeError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc
    nested = [k for k, v in data.items() if isinstance(v, dict)]
    if nested:
        raise ConfigurationError(f"{path}: config is a flat key set, found tables {nested}")
    return data
