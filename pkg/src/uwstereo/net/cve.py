"""Cross view enhancement: attention adapter, positional embedding and LoFTR-style blocks."""

from __future__ import annotations

import math

import torch
import torch.nn as nn
import torch.nn.functional as F


def sinusoidal_embedding_2d(channels: int, height: int, width: int, device=None, dtype=None,
                            offset: tuple[int, int] = (0, 0)) -> torch.Tensor:
    """(channels, H, W) embedding of positions starting at `offset` (y0, x0); half the channels encode x, half y."""
    quarter = channels // 4
    freq = torch.exp(torch.arange(quarter, device=device, dtype=torch.float64)
                     * (-math.log(10000.0) / max(quarter, 1)))
    ys = (offset[0] + torch.arange(height, device=device, dtype=torch.float64))[:, None] * freq
    xs = (offset[1] + torch.arange(width, device=device, dtype=torch.float64))[:, None] * freq
    pe = torch.zeros(channels, height, width, device=device, dtype=torch.float64)
    pe[0:quarter] = torch.sin(xs).T[:, None, :]
    pe[quarter:2 * quarter] = torch.cos(xs).T[:, None, :]
    pe[2 * quarter:3 * quarter] = torch.sin(ys).T[:, :, None]
    pe[3 * quarter:4 * quarter] = torch.cos(ys).T[:, :, None]
    return pe.to(dtype or torch.get_default_dtype())


class LearnedEmbedding2D(nn.Module):
    def __init__(self, channels: int, grid: tuple[int, int] = (32, 64)):
        super().__init__()
        self.table = nn.Parameter(torch.randn(channels, *grid) * 0.02)

    def forward(self, height: int, width: int) -> torch.Tensor:
        if self.table.shape[-2:] == (height, width):
            return self.table
        return F.interpolate(self.table[None], size=(height, width), mode="bilinear",
                             align_corners=False)[0]


def linear_attention(q, k, v, eps: float = 1e-6):
    """Kernelized attention with elu+1 feature maps; q: (B, L, H, D), k/v: (B, S, H, D)."""
    q = F.elu(q) + 1
    k = F.elu(k) + 1
    s = v.shape[1]
    kv = torch.einsum("bshd,bshv->bhdv", k, v / s)
    z = 1.0 / (torch.einsum("blhd,bhd->blh", q, k.sum(dim=1)) + eps)
    return torch.einsum("blhd,bhdv,blh->blhv", q, kv, z) * s


class LoFTRLayer(nn.Module):
    """Attention message from `source` to `x`, merged through an MLP on [x, message]."""

    def __init__(self, d_model: int, nhead: int):
        super().__init__()
        self.nhead = nhead
        self.dim = d_model // nhead
        self.q_proj = nn.Linear(d_model, d_model, bias=False)
        self.k_proj = nn.Linear(d_model, d_model, bias=False)
        self.v_proj = nn.Linear(d_model, d_model, bias=False)
        self.merge = nn.Linear(d_model, d_model, bias=False)
        self.mlp = nn.Sequential(
            nn.Linear(d_model * 2, d_model * 2, bias=False),
            nn.ReLU(inplace=True),
            nn.Linear(d_model * 2, d_model, bias=False),
        )
        self.norm1 = nn.LayerNorm(d_model)
        self.norm2 = nn.LayerNorm(d_model)

    def forward(self, x, source):
        b = x.shape[0]
        q = self.q_proj(x).view(b, -1, self.nhead, self.dim)
        k = self.k_proj(source).view(b, -1, self.nhead, self.dim)
        v = self.v_proj(source).view(b, -1, self.nhead, self.dim)
        msg = linear_attention(q, k, v).reshape(b, -1, self.nhead * self.dim)
        msg = self.norm1(self.merge(msg))
        msg = self.norm2(self.mlp(torch.cat([x, msg], dim=-1)))
        return x + msg


class LoFTRBlock(nn.Module):
    """Self-attention within each view, then cross-attention between views.

    Both streams update simultaneously from the same inputs with shared
    weights, so swapping the views swaps the outputs.
    """

    def __init__(self, d_model: int, nhead: int):
        super().__init__()
        self.self_attn = LoFTRLayer(d_model, nhead)
        self.cross_attn = LoFTRLayer(d_model, nhead)

    def forward(self, a, b):
        a, b = self.self_attn(a, a), self.self_attn(b, b)
        return self.cross_attn(a, b), self.cross_attn(b, a)


class TokenAdapter(nn.Module):
    """Multi-head self-attention mapping CNN features to patch tokens (one token per position)."""

    def __init__(self, d_model: int, nhead: int):
        super().__init__()
        self.attn = nn.MultiheadAttention(d_model, nhead, batch_first=True)
        self.norm = nn.LayerNorm(d_model)

    def forward(self, tokens):
        out, _ = self.attn(tokens, tokens, tokens, need_weights=False)
        return self.norm(tokens + out)


class CrossViewEnhancement(nn.Module):
    def __init__(self, channels: int, n_blocks: int = 4, nhead: int = 2, positional: str = "sinusoidal",
                 offset_range: int = 0):
        super().__init__()
        # Training draws a random origin for the sinusoidal grid in [0, offset_range) so that
        # only relative position is learnable and larger test images see no unfamiliar positions.
        self.offset_range = offset_range
        self.adapter = TokenAdapter(channels, nhead)
        self.blocks = nn.ModuleList([LoFTRBlock(channels, nhead) for _ in range(n_blocks)])
        self.positional = positional
        self.pos_embed = LearnedEmbedding2D(channels) if positional == "learned" else None

    def _embedding(self, c, h, w, ref):
        if self.pos_embed is not None:
            return self.pos_embed(h, w)
        offset = (0, 0)
        if self.training and self.offset_range > 0:
            offset = tuple(int(v) for v in torch.randint(0, self.offset_range, (2,)))
        return sinusoidal_embedding_2d(c, h, w, device=ref.device, dtype=ref.dtype, offset=offset)

    def forward(self, f_left: torch.Tensor, f_right: torch.Tensor):
        if f_left.shape != f_right.shape:
            raise ValueError(f"view feature shapes differ: {tuple(f_left.shape)} vs {tuple(f_right.shape)}")
        b, c, h, w = f_left.shape
        pe = self._embedding(c, h, w, f_left).reshape(c, h * w).T
        a = self.adapter(f_left.flatten(2).transpose(1, 2)) + pe
        z = self.adapter(f_right.flatten(2).transpose(1, 2)) + pe
        for block in self.blocks:
            a, z = block(a, z)
        unflat = lambda t: t.transpose(1, 2).reshape(b, c, h, w)  # noqa: E731
        return unflat(a), unflat(z)
