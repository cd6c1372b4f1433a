"""Supervised stereo training and transfer of pretrained backbone weights."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import torch

from ..checkpoint import CheckpointError, checkpoint_config, load_checkpoint, make_checkpoint
from ..data.manifest import DatasetManifest
from ..net.config import ConfigError, ModelConfig
from ..net.model import BACKBONE_PREFIXES, StereoNet
from .data import BatchSampler, load_samples
from .evaluate import predict_disparity
from .losses import stereo_loss
from .metrics import compute_epe


class IncompatibleCheckpointError(CheckpointError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    crop_h: int = 128
    crop_w: int = 256
    gamma: float = 0.9
    train_iters: int = 22
    eval_iters: int = 32
    steps: int = 1000
    batch_size: int = 2
    learning_rate: float = 2.0e-4
    weight_decay: float = 1.0e-5
    seed: int = 0
    augment: bool = True
    asymmetric_color: bool = False
    max_disparity: float = 192.0
    schedule: str = "onecycle"
    grad_clip: float = 1.0
    val_every: int = 0
    strict_determinism: bool = False

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.crop_h % 16 or self.crop_w % 16 or self.crop_h <= 0 or self.crop_w <= 0:
            raise ConfigError(f"crop {self.crop_h}x{self.crop_w} must be positive multiples of 16")
        if self.train_iters < 1 or self.eval_iters < 1:
            raise ConfigError("iteration counts must be >= 1")
        if self.steps < 0 or self.batch_size < 1:
            raise ConfigError("steps must be >= 0 and batch_size >= 1")
        if self.schedule not in ("onecycle", "constant"):
            raise ConfigError(f"unknown schedule {self.schedule!r}")

    @classmethod
    def wide_crop(cls, **kw) -> "TrainConfig":
        return cls(crop_h=320, crop_w=736, **kw)


@dataclass
class TransferReport:
    copied: list[str] = field(default_factory=list)
    dropped: list[str] = field(default_factory=list)
    new: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def transfer_pretrained_weights(pretrain_checkpoint, model: StereoNet) -> tuple[StereoNet, TransferReport]:
    """Copy extractor, CVE and cost-aggregation weights into `model`; decoders and mask token are dropped."""
    ckpt = load_checkpoint(pretrain_checkpoint)
    if ckpt["kind"] != "pretrain":
        raise CheckpointError(f"expected a pretrain checkpoint, got kind {ckpt['kind']!r}")
    source = ckpt["state_dict"]
    target = model.state_dict()
    report = TransferReport()
    mismatched = []
    updates = {}
    for key, value in source.items():
        name = key[len("stereo."):] if key.startswith("stereo.") else None
        if name is None or not name.startswith(BACKBONE_PREFIXES):
            report.dropped.append(key)
            continue
        if name not in target:
            mismatched.append(f"{name} (absent from model)")
        elif target[name].shape != value.shape:
            mismatched.append(f"{name} {tuple(value.shape)} vs {tuple(target[name].shape)}")
        else:
            updates[name] = value
    missing = [k for k in target if k.startswith(BACKBONE_PREFIXES) and k not in updates]
    if mismatched or missing:
        details = mismatched + [f"{k} (absent from checkpoint)" for k in missing]
        raise IncompatibleCheckpointError(
            f"{len(details)} incompatible parameter(s): " + ", ".join(details[:8])
            + (" ..." if len(details) > 8 else ""))
    with torch.no_grad():
        for name, value in updates.items():
            target[name].copy_(value)
    report.copied = sorted(updates)
    report.new = sorted(k for k in target if k not in updates)
    report.dropped.sort()
    return model, report


def _dataset_samples(dataset, split="train"):
    if isinstance(dataset, (str, DatasetManifest)) or hasattr(dataset, "__fspath__"):
        return load_samples(dataset, split)
    return list(dataset)


def _validate(model, samples, iters):
    model.eval()
    epes = []
    with torch.no_grad():
        for s in samples:
            epes.append(compute_epe(predict_disparity(model, s.left, s.right, iters), s.disparity))
    model.train()
    return float(np.mean(epes))


def train_model(dataset, config: TrainConfig = TrainConfig(), init=None, model_config: ModelConfig | None = None,
                val_samples=None, log_path=None, callback=None):
    """Train a StereoNet on the weighted init-plus-refinement sequence loss.

    `dataset` is a manifest (its train split is used) or a list of StereoSample.
    `init` is None / "random" or a pretrain checkpoint (path or dict).
    `callback(step, model, record)` may return True to stop early.
    Returns (model, checkpoint dict, log records).
    """
    samples = _dataset_samples(dataset, "train")
    if not samples:
        raise ValueError("train split is empty")
    if config.strict_determinism:
        torch.use_deterministic_algorithms(True)
    torch.manual_seed(config.seed)
    if init is not None and not (isinstance(init, str) and init == "random"):
        ckpt = load_checkpoint(init)
        mc = model_config or checkpoint_config(ckpt)
    else:
        ckpt = None
        mc = model_config or ModelConfig()
    mc = replace(mc, train_iters=config.train_iters, eval_iters=config.eval_iters)
    model = StereoNet(mc)
    transfer = None
    if ckpt is not None:
        model, transfer = transfer_pretrained_weights(ckpt, model)

    meta = {"train": asdict(config), "init": "random" if ckpt is None else "pretrained"}
    log: list[dict] = []
    fh = open(log_path, "w") if log_path else None
    try:
        if config.steps > 0:
            opt = torch.optim.AdamW(model.parameters(), lr=config.learning_rate, weight_decay=config.weight_decay)
            if config.schedule == "onecycle":
                sched = torch.optim.lr_scheduler.OneCycleLR(
                    opt, config.learning_rate, total_steps=config.steps + 100, pct_start=0.01,
                    cycle_momentum=False, anneal_strategy="linear")
            else:
                sched = None
            sampler = BatchSampler(samples, config.batch_size, (config.crop_h, config.crop_w), config.seed,
                                   augment=config.augment, asymmetric_color=config.asymmetric_color)
            model.train()
            for step in range(config.steps):
                left, right, gt = sampler.next_batch()
                est = model(left, right, iters=config.train_iters)
                loss = stereo_loss(est.d_init, est.refinements, gt, config.gamma, config.max_disparity)
                opt.zero_grad(set_to_none=True)
                loss.backward()
                if config.grad_clip:
                    torch.nn.utils.clip_grad_norm_(model.parameters(), config.grad_clip)
                opt.step()
                if sched is not None:
                    sched.step()
                rec = {"step": step, "loss": float(loss.detach()),
                       "epe": compute_epe(est.final, gt)}
                if val_samples and config.val_every and (step + 1) % config.val_every == 0:
                    rec["val_epe"] = _validate(model, val_samples, config.eval_iters)
                log.append(rec)
                if fh:
                    fh.write(json.dumps(rec) + "\n")
                if callback is not None:
                    stop = callback(step, model, rec)
                    model.train()
                    if stop:
                        break
    finally:
        if fh:
            fh.close()
    if transfer is not None:
        meta["transfer"] = {k: len(v) for k, v in transfer.to_dict().items()}
    model.eval()
    return model, make_checkpoint(model.state_dict(), model.config, "stereo", meta), log


def load_stereo_model(source) -> StereoNet:
    """Build a StereoNet from a stereo checkpoint path or dict."""
    ckpt = load_checkpoint(source)
    if ckpt["kind"] != "stereo":
        raise CheckpointError(f"expected a stereo checkpoint, got kind {ckpt['kind']!r}")
    model = StereoNet(checkpoint_config(ckpt))
    model.load_state_dict(ckpt["state_dict"])
    return model.eval()
