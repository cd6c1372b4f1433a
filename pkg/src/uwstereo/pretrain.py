"""Paired masked image reconstruction pretraining."""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .checkpoint import make_checkpoint, save_checkpoint
from .net.config import ConfigError, ModelConfig
from .net.features import SCALES
from .net.model import BACKBONE_PREFIXES, StereoNet


@dataclass(frozen=True)
class MaskSpec:
    """Patch masking; `left_ratio` and `right_ratio` are r1 and r2."""

    patch_size: int = 32
    left_ratio: float = 0.5
    right_ratio: float = 0.5
    seed: int = 0

    def __post_init__(self):
        for r in (self.left_ratio, self.right_ratio):
            if not 0.0 <= r <= 1.0:
                raise ValueError(f"mask ratio must lie in [0, 1], got {r}")
        if self.patch_size < 8 or self.patch_size % 8:
            raise ValueError("patch_size must be a positive multiple of 8 pixels")


def masked_count(ratio: float, n: int) -> int:
    """round(ratio * n) with halves rounded up."""
    return int(math.floor(ratio * n + 0.5))


def generate_patch_mask(grid_h: int, grid_w: int, ratio: float, seed) -> np.ndarray:
    """Binary (grid_h, grid_w) mask with exactly round(ratio * N) ones at seeded positions."""
    if not 0.0 <= ratio <= 1.0:
        raise ValueError(f"ratio must lie in [0, 1], got {ratio}")
    n = grid_h * grid_w
    k = masked_count(ratio, n)
    mask = np.zeros(n, dtype=np.uint8)
    if k:
        mask[np.random.default_rng(seed).choice(n, size=k, replace=False)] = 1
    return mask.reshape(grid_h, grid_w)


def expand_mask(mask: np.ndarray, cell: int, height: int, width: int) -> np.ndarray:
    """Repeat each patch entry into a `cell` x `cell` block and crop to (height, width)."""
    big = np.repeat(np.repeat(mask, cell, axis=0), cell, axis=1)
    if big.shape[0] < height or big.shape[1] < width:
        raise ValueError("mask grid does not cover the requested extent")
    return big[:height, :width]


def apply_feature_mask(f: torch.Tensor, w: torch.Tensor, m: torch.Tensor) -> torch.Tensor:
    """f * (1 - w) + m * w for a binary mask w; unmasked entries are passed through untouched.

    f: (B, C, H, W); w broadcastable to (B, 1, H, W); m: (C,).
    """
    if w.dim() == 2:
        w = w[None, None]
    elif w.dim() == 3:
        w = w[:, None]
    if w.shape[-2:] != f.shape[-2:]:
        raise ValueError(f"mask {tuple(w.shape[-2:])} does not match features {tuple(f.shape[-2:])}")
    if m.shape != (f.shape[1],):
        raise ValueError(f"mask token has shape {tuple(m.shape)}, expected ({f.shape[1]},)")
    return torch.where(w.to(torch.bool), m.view(1, -1, 1, 1).to(f.dtype), f)


def downsample_targets(image: torch.Tensor, scales=SCALES) -> dict[int, torch.Tensor]:
    """Area-averaged copies of `image` at (H * 2 / s, W * 2 / s) for each scale s."""
    h, w = image.shape[-2:]
    out = {}
    for s in scales:
        size = (h * 2 // s, w * 2 // s)
        out[s] = image if size == (h, w) else F.interpolate(image, size=size, mode="area")
    return out


def masked_recon_loss(outputs: dict, targets: dict, masks: dict, n_mask: int,
                      pixel_normalize: bool = True, patch_size: int = 32) -> torch.Tensor:
    """Sum over scales of masked-region L1 for both views, divided by the masked patch count.

    outputs/targets: {scale: (left, right)} images; masks: {scale: (w_left, w_right)}
    of shape (B, 1, h, w) at the output resolution. With `pixel_normalize` each
    scale term is further divided by the number of values in one patch at that
    scale, making the scales comparable.
    """
    if set(outputs) != set(targets) or set(outputs) != set(masks):
        raise ValueError(f"scale sets differ: outputs {sorted(outputs)}, targets {sorted(targets)}, "
                         f"masks {sorted(masks)}")
    ref = next(iter(outputs.values()))[0]
    if n_mask == 0:
        return ref.new_zeros(())
    total = ref.new_zeros(())
    for s in sorted(outputs):
        term = ref.new_zeros(())
        for pred, tgt, w in zip(outputs[s], targets[s], masks[s]):
            term = term + ((pred - tgt).abs() * w).sum()
        if pixel_normalize:
            cell = patch_size * 2 // s
            term = term / (cell * cell * targets[s][0].shape[1])
        total = total + term
    return total / n_mask


class ReconstructionDecoder(nn.Module):
    """Two transposed convolutions: 2x upsampling, then projection to RGB."""

    def __init__(self, in_channels: int, mid: int = 16):
        super().__init__()
        self.up = nn.ConvTranspose2d(in_channels, mid, 4, stride=2, padding=1)
        self.out = nn.ConvTranspose2d(mid, 3, 3, stride=1, padding=1)

    def forward(self, x):
        return self.out(F.leaky_relu(self.up(x), 0.1))


class MaskedPretrainNet(nn.Module):
    """Stereo backbone (no updater use) plus mask token and per-scale decoders."""

    def __init__(self, config: ModelConfig | None = None, stereo: StereoNet | None = None):
        super().__init__()
        self.stereo = stereo if stereo is not None else StereoNet(config)
        self.config = self.stereo.config
        ch = self.stereo.features.channels
        self.mask_token = nn.Parameter(torch.zeros(ch[2]))
        self.decoders = nn.ModuleDict({str(s): ReconstructionDecoder(ch[s]) for s in SCALES})

    def forward(self, left, right, w_left, w_right) -> dict[int, tuple[torch.Tensor, torch.Tensor]]:
        """Reconstructions {scale: (left, right)}; w_* are (B, 1, H/2, W/2) masks at 1/2 resolution."""
        n = left.shape[0]
        f2 = self.stereo.features.forward_stem(torch.cat([left, right], dim=0))
        f2l = apply_feature_mask(f2[:n], w_left, self.mask_token)
        f2r = apply_feature_mask(f2[n:], w_right, self.mask_token)
        pyr_l, pyr_r, _, cost_feature = self.stereo.backbone_from_half(f2l, f2r)
        pyr_l = {**pyr_l, 4: cost_feature}
        return {s: (self.decoders[str(s)](pyr_l[s]), self.decoders[str(s)](pyr_r[s])) for s in SCALES}

    def pretrain_state_dict(self) -> dict:
        """Backbone, decoder and mask-token parameters; the unused updater is left out."""
        keep = tuple("stereo." + p for p in BACKBONE_PREFIXES) + ("decoders.", "mask_token")
        return {k: v for k, v in self.state_dict().items() if k.startswith(keep)}


def make_masks(batch: int, height: int, width: int, mask_spec: MaskSpec, step: int):
    """Independent left/right patch grids per sample and N_mask, the masked patch total over both views."""
    gh = math.ceil(height / mask_spec.patch_size)
    gw = math.ceil(width / mask_spec.patch_size)
    grids = {"left": [], "right": []}
    for i in range(batch):
        for view, ratio in (("left", mask_spec.left_ratio), ("right", mask_spec.right_ratio)):
            seed = [mask_spec.seed, step, i, zlib.crc32(view.encode())]
            grids[view].append(generate_patch_mask(gh, gw, ratio, seed))
    n_mask = int(sum(g.sum() for v in grids.values() for g in v))
    return grids["left"], grids["right"], n_mask


def masks_at_scales(grids: list[np.ndarray], height: int, width: int, patch_size: int = 32):
    """{scale: (B, 1, H*2/s, W*2/s)} plus the 1/2-resolution feature mask."""
    out = {}
    for s in SCALES:
        h, w = height * 2 // s, width * 2 // s
        cell = patch_size * 2 // s
        out[s] = torch.from_numpy(np.stack([expand_mask(g, cell, h, w) for g in grids])[:, None]).float()
    feat = torch.from_numpy(
        np.stack([expand_mask(g, patch_size // 2, height // 2, width // 2) for g in grids])[:, None]
    ).float()
    return out, feat


def pretrain_step(left, right, model, mask_spec: MaskSpec, optimizer, step: int = 0) -> float:
    """One optimizer step on the reconstruction loss; returns the loss (0.0 and no step if nothing is masked)."""
    if not isinstance(model, MaskedPretrainNet) or not hasattr(model, "decoders"):
        raise ConfigError("pretraining requires a model with reconstruction decoders (MaskedPretrainNet)")
    b, _, h, w = left.shape
    g_left, g_right, n_mask = make_masks(b, h, w, mask_spec, step)
    if n_mask == 0:
        return 0.0
    m_left, feat_left = masks_at_scales(g_left, h, w, mask_spec.patch_size)
    m_right, feat_right = masks_at_scales(g_right, h, w, mask_spec.patch_size)
    model.train()
    outputs = model(left, right, feat_left, feat_right)
    tl, tr = downsample_targets(left), downsample_targets(right)
    targets = {s: (tl[s], tr[s]) for s in SCALES}
    masks = {s: (m_left[s], m_right[s]) for s in SCALES}
    loss = masked_recon_loss(outputs, targets, masks, n_mask, patch_size=mask_spec.patch_size)
    optimizer.zero_grad(set_to_none=True)
    loss.backward()
    optimizer.step()
    return float(loss.detach())


@dataclass(frozen=True)
class PretrainConfig:
    steps: int = 1000
    batch_size: int = 4
    crop_h: int = 128
    crop_w: int = 256
    learning_rate: float = 1.0e-4
    mask: MaskSpec = MaskSpec()
    seed: int = 0


def pretrain(samples, config: PretrainConfig = PretrainConfig(), model_config: ModelConfig | None = None,
             log_path=None):
    """Run masked pretraining on stereo samples; returns (model, log records)."""
    from .train.data import BatchSampler

    if not samples:
        raise ValueError("no pretraining samples")
    torch.manual_seed(config.seed)
    model = MaskedPretrainNet(model_config)
    opt = torch.optim.AdamW(model.parameters(), lr=config.learning_rate, weight_decay=1e-5)
    sampler = BatchSampler(samples, config.batch_size, (config.crop_h, config.crop_w), config.seed,
                           augment=False)
    log = []
    fh = open(log_path, "w") if log_path else None
    try:
        for step in range(config.steps):
            left, right, _ = sampler.next_batch()
            loss = pretrain_step(left, right, model, config.mask, opt, step)
            rec = {"step": step, "loss": loss}
            log.append(rec)
            if fh:
                fh.write(json.dumps(rec) + "\n")
    finally:
        if fh:
            fh.close()
    return model, log


def save_pretrain_checkpoint(path, model: MaskedPretrainNet, meta: dict | None = None) -> Path:
    ckpt = make_checkpoint(model.pretrain_state_dict(), model.config, "pretrain", meta)
    return save_checkpoint(path, ckpt)


def pretrain_checkpoint(model: MaskedPretrainNet, config: PretrainConfig | None = None) -> dict:
    meta = {"pretrain": asdict(config)} if config is not None else {}
    return make_checkpoint(model.pretrain_state_dict(), model.config, "pretrain", meta)
