"""Supervised stereo loss over the initial estimate and every refinement."""

from __future__ import annotations

import torch
import torch.nn.functional as F


def iteration_weights(n: int, gamma: float = 0.9) -> list[float]:
    """gamma ** (n - i) for i = 1..n; the last refinement always gets weight 1."""
    if n < 1:
        raise ValueError("need at least one refinement")
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    return [gamma ** (n - i) for i in range(1, n + 1)]


def stereo_loss(d_init: torch.Tensor, refinements, d_gt: torch.Tensor, gamma: float = 0.9,
                max_disparity: float | None = 192.0, valid: torch.Tensor | None = None) -> torch.Tensor:
    """SmoothL1 (beta=1) on d_init plus gamma-weighted L1 on each refinement, means over valid pixels.

    Ground truth is clipped to [0, max_disparity] when a maximum is given.
    """
    refinements = list(refinements)
    if not refinements:
        raise ValueError("refinement list is empty")
    for d in [d_init, *refinements]:
        if d.shape != d_gt.shape:
            raise ValueError(f"prediction shape {tuple(d.shape)} does not match ground truth {tuple(d_gt.shape)}")
    gt = d_gt.clamp(0.0, max_disparity) if max_disparity is not None else d_gt
    if valid is None:
        valid = torch.ones_like(gt, dtype=torch.bool)
    if not valid.any():
        raise ValueError("no valid pixels")

    loss = F.smooth_l1_loss(d_init[valid], gt[valid], beta=1.0)
    for w, d in zip(iteration_weights(len(refinements), gamma), refinements):
        loss = loss + w * (d[valid] - gt[valid]).abs().mean()
    return loss
