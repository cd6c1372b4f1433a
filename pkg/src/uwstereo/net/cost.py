from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F


def groupwise_correlation(f_left, f_right, num_candidates: int, num_groups: int = 1):
    """(B, G, K, H, W) volume; entry k correlates left x with right x - k, zero when x - k < 0."""
    if f_left.shape != f_right.shape:
        raise ValueError("left/right feature shapes differ")
    b, c, h, w = f_left.shape
    if num_candidates > w:
        raise ValueError(f"{num_candidates} candidates exceed feature width {w}")
    if c % num_groups:
        raise ValueError(f"{c} channels not divisible into {num_groups} groups")
    fl = f_left.view(b, num_groups, c // num_groups, h, w)
    fr = f_right.view(b, num_groups, c // num_groups, h, w)
    vol = f_left.new_zeros(b, num_groups, num_candidates, h, w)
    for k in range(num_candidates):
        if k == 0:
            vol[:, :, 0] = (fl * fr).mean(dim=2)
        else:
            vol[:, :, k, :, k:] = (fl[..., k:] * fr[..., :-k]).mean(dim=2)
    return vol


def build_cost_volume(f_left, f_right, max_disparity: int):
    """Channel-mean correlation over max_disparity / 4 quarter-resolution shifts: (B, D/4, H, W)."""
    if max_disparity % 4:
        raise ValueError(f"max_disparity must be divisible by 4, got {max_disparity}")
    k = max_disparity // 4
    if k > f_left.shape[-1]:
        raise ValueError(
            f"max_disparity {max_disparity} exceeds 4 x feature width ({4 * f_left.shape[-1]})"
        )
    return groupwise_correlation(f_left, f_right, k, 1)[:, 0]


def soft_argmin(scores):
    """Expected candidate index under softmax over dim 1; returns (B, H, W) in candidate units."""
    prob = F.softmax(scores, dim=1)
    idx = torch.arange(scores.shape[1], device=scores.device, dtype=scores.dtype)
    return (prob * idx.view(1, -1, 1, 1)).sum(dim=1)


def regress_init_disparity(scores, scale: int = 4):
    """Full-resolution initial disparity: `scale` * soft-argmin, bilinearly upsampled by `scale`."""
    d = scale * soft_argmin(scores)
    return upsample_disparity(d, scale)


def upsample_disparity(d, scale: int = 4):
    """Bilinear resize of a (B, h, w) map already expressed in full-resolution pixels."""
    return F.interpolate(d[:, None], scale_factor=scale, mode="bilinear", align_corners=False)[:, 0]


class CostAggregation(nn.Module):
    """3D convolutions over the group-wise volume, reducing it to one score per candidate.

    Also produces the aggregated left cost feature: enhanced left features
    fused with the score profile at every position.
    """

    def __init__(self, channels: int, num_groups: int, num_candidates: int):
        super().__init__()
        self.num_groups = num_groups
        self.num_candidates = num_candidates
        mid = 8
        self.agg = nn.Sequential(
            nn.Conv3d(num_groups, mid, 3, 1, 1), nn.LeakyReLU(0.1, inplace=True),
            nn.Conv3d(mid, mid, 3, 1, 1), nn.LeakyReLU(0.1, inplace=True),
        )
        self.score = nn.Conv3d(mid, 1, 3, 1, 1)
        self.fuse = nn.Sequential(
            nn.Conv2d(channels + num_candidates, channels, 3, 1, 1), nn.LeakyReLU(0.1, inplace=True),
            nn.Conv2d(channels, channels, 3, 1, 1),
        )

    def forward(self, f_left, f_right):
        vol = groupwise_correlation(f_left, f_right, self.num_candidates, self.num_groups)
        hidden = self.agg(vol)
        # residual on the plain correlation keeps the argmax meaningful at init
        scores = self.score(hidden)[:, 0] + vol.mean(dim=1) * 10.0
        cost_feature = f_left + self.fuse(torch.cat([f_left, F.softmax(scores, dim=1)], dim=1))
        return scores, cost_feature
