"""Single-file checkpoints: format version, config JSON and named tensors."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import torch

from lcsplit.model.config import ModelConfig

FORMAT_VERSION = 1


class CheckpointError(RuntimeError):
    pass


def save_checkpoint(path: str | Path, model: torch.nn.Module, extra: dict[str, Any] | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format_version": FORMAT_VERSION,
        "config": model.config.to_json(),
        "state_dict": {k: v.detach().cpu().clone() for k, v in model.state_dict().items()},
        "extra": json.dumps(extra or {}, sort_keys=True),
    }
    torch.save(payload, path)
    return path


def load_checkpoint(path: str | Path, expected: ModelConfig | None = None):
    """Rebuild the model stored at ``path``; returns ``(model, extra)``.

    With ``expected`` given, the stored config must match it exactly.
    """
    from lcsplit.model import build

    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    payload = torch.load(path, map_location="cpu", weights_only=True)
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format {version!r}")
    config = ModelConfig.from_dict(json.loads(payload["config"]))
    if expected is not None and expected != config:
        raise CheckpointError(f"checkpoint config {config} does not match expected {expected}")
    model = build(config)
    state = payload["state_dict"]
    missing = set(model.state_dict()) ^ set(state)
    if missing:
        raise CheckpointError(f"parameter names differ from config: {sorted(missing)[:5]}")
    for name, tensor in model.state_dict().items():
        if tensor.shape != state[name].shape:
            raise CheckpointError(f"shape mismatch for {name}: {tuple(tensor.shape)} vs {tuple(state[name].shape)}")
    model.load_state_dict(state)
    model.eval()
    return model, json.loads(payload["extra"])
