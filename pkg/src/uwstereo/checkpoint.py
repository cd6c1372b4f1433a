"""Self-describing checkpoint archives: parameters by name plus the model configuration."""

from __future__ import annotations

from pathlib import Path

import torch

from .net.config import ModelConfig

FORMAT = "uwstereo-checkpoint"
VERSION = 1
KINDS = ("stereo", "pretrain")


class CheckpointError(ValueError):
    pass


def make_checkpoint(state_dict: dict, config: ModelConfig, kind: str, meta: dict | None = None) -> dict:
    if kind not in KINDS:
        raise CheckpointError(f"unknown checkpoint kind {kind!r}")
    return {
        "format": FORMAT,
        "version": VERSION,
        "kind": kind,
        "model_config": config.to_dict(),
        "state_dict": {k: v.detach().cpu().clone() for k, v in state_dict.items()},
        "meta": dict(meta or {}),
    }


def save_checkpoint(path, checkpoint: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(checkpoint, path)
    return path


def load_checkpoint(source) -> dict:
    """Accepts a path or an already-loaded checkpoint dict."""
    if isinstance(source, dict):
        ckpt = source
    else:
        path = Path(source)
        if not path.exists():
            raise FileNotFoundError(f"checkpoint not found: {path}")
        ckpt = torch.load(path, map_location="cpu", weights_only=True)
    if ckpt.get("format") != FORMAT:
        raise CheckpointError("not a uwstereo checkpoint")
    if ckpt.get("version") != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {ckpt.get('version')!r}")
    return ckpt


def checkpoint_config(ckpt: dict) -> ModelConfig:
    return ModelConfig.from_dict(ckpt["model_config"])
