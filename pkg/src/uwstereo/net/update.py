"""Recurrent disparity refinement from local cost lookups."""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F


def lookup_cost(scores, disp, radius: int):
    """Linearly interpolated scores at disp + (-radius..radius) along the candidate axis.

    scores: (B, K, H, W); disp: (B, H, W) in candidate units. Out-of-range
    samples read zero. Returns (B, 2 * radius + 1, H, W).
    """
    k = scores.shape[1]
    offsets = torch.arange(-radius, radius + 1, device=disp.device, dtype=disp.dtype)
    pos = disp[:, None] + offsets.view(1, -1, 1, 1)
    i0 = torch.floor(pos)
    w1 = pos - i0
    i0 = i0.long()
    out = 0
    for idx, weight in ((i0, 1 - w1), (i0 + 1, w1)):
        valid = (idx >= 0) & (idx < k)
        vals = torch.gather(scores, 1, idx.clamp(0, k - 1))
        out = out + torch.where(valid, vals, torch.zeros_like(vals)) * weight
    return out


class CostPyramid:
    """Score volume plus copies average-pooled along the candidate axis."""

    def __init__(self, scores, levels: int):
        self.volumes = [scores]
        for _ in range(levels - 1):
            v = self.volumes[-1]
            b, k, h, w = v.shape
            pooled = F.avg_pool1d(v.permute(0, 2, 3, 1).reshape(-1, 1, k), 2, 2)
            self.volumes.append(pooled.reshape(b, h, w, -1).permute(0, 3, 1, 2))

    def __call__(self, disp, radius):
        return torch.cat([lookup_cost(v, disp / 2**i, radius) for i, v in enumerate(self.volumes)], dim=1)


class MotionEncoder(nn.Module):
    def __init__(self, corr_channels: int, out_channels: int):
        super().__init__()
        self.convc1 = nn.Conv2d(corr_channels, 48, 1)
        self.convc2 = nn.Conv2d(48, 32, 3, padding=1)
        self.convd1 = nn.Conv2d(1, 16, 7, padding=3)
        self.convd2 = nn.Conv2d(16, 16, 3, padding=1)
        self.conv = nn.Conv2d(48, out_channels - 1, 3, padding=1)

    def forward(self, disp, corr):
        c = F.relu(self.convc2(F.relu(self.convc1(corr))))
        d = F.relu(self.convd2(F.relu(self.convd1(disp))))
        out = F.relu(self.conv(torch.cat([c, d], dim=1)))
        return torch.cat([out, disp], dim=1)


class ConvGRU(nn.Module):
    def __init__(self, hidden: int, inp: int):
        super().__init__()
        self.convz = nn.Conv2d(hidden + inp, hidden, 3, padding=1)
        self.convr = nn.Conv2d(hidden + inp, hidden, 3, padding=1)
        self.convq = nn.Conv2d(hidden + inp, hidden, 3, padding=1)

    def forward(self, h, cz, cr, cq, x):
        hx = torch.cat([h, x], dim=1)
        z = torch.sigmoid(self.convz(hx) + cz)
        r = torch.sigmoid(self.convr(hx) + cr)
        q = torch.tanh(self.convq(torch.cat([r * h, x], dim=1)) + cq)
        return (1 - z) * h + z * q


class UpdateBlock(nn.Module):
    def __init__(self, hidden: int, context: int, corr_channels: int):
        super().__init__()
        self.encoder = MotionEncoder(corr_channels, hidden)
        self.gru = ConvGRU(hidden, hidden + context)
        self.head = nn.Sequential(
            nn.Conv2d(hidden, hidden, 3, padding=1), nn.ReLU(inplace=True),
            nn.Conv2d(hidden, 1, 3, padding=1),
        )

    def forward(self, net, ctx, gates, disp, corr):
        motion = self.encoder(disp, corr)
        net = self.gru(net, *gates, torch.cat([ctx, motion], dim=1))
        return net, self.head(net)
