from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .config import ModelConfig
from .cost import CostAggregation, soft_argmin, upsample_disparity
from .cve import CrossViewEnhancement
from .features import FeatureExtractor, conv
from .update import CostPyramid, UpdateBlock

MODES = ("full", "pretrain-backbone")
# Parameter name prefixes shared between pretraining and stereo training.
BACKBONE_PREFIXES = ("features.", "cve.", "cost_agg.")


@dataclass
class DisparityEstimate:
    d_init: torch.Tensor
    refinements: list[torch.Tensor]

    @property
    def final(self) -> torch.Tensor:
        return self.refinements[-1]


@dataclass
class BackboneFeatures:
    """Pyramids for both views (1/4 entries are post-enhancement) and the left cost feature."""

    left: dict[int, torch.Tensor]
    right: dict[int, torch.Tensor]
    cost_feature: torch.Tensor


class StereoNet(nn.Module):
    def __init__(self, config: ModelConfig | None = None):
        super().__init__()
        self.config = config = config or ModelConfig()
        c = config.base_channels
        hd = config.hidden_dim
        self.features = FeatureExtractor(c)
        self.cve = CrossViewEnhancement(c, config.n_loftr, config.attention_heads,
                                        config.positional_embedding, config.position_jitter)
        self.cost_agg = CostAggregation(c, config.corr_groups, config.num_candidates)
        ch = self.features.channels
        self.context = nn.Sequential(
            conv(c + ch[8] + ch[16], 2 * c),
            nn.Conv2d(2 * c, 5 * hd, 3, padding=1),
        )
        corr_channels = config.corr_levels * (2 * config.corr_radius + 1)
        self.updater = UpdateBlock(hd, hd, corr_channels)

    def _run_backbone(self, pyr_l, pyr_r):
        f4l, f4r = self.cve(pyr_l[4], pyr_r[4])
        pyr_l = {**pyr_l, 4: f4l}
        pyr_r = {**pyr_r, 4: f4r}
        scores, cost_feature = self.cost_agg(f4l, f4r)
        return pyr_l, pyr_r, scores, cost_feature

    def backbone_from_half(self, f2_left, f2_right):
        """Backbone pass starting from (possibly masked) 1/2-resolution features."""
        n = f2_left.shape[0]
        pyr = self.features.forward_from_half(torch.cat([f2_left, f2_right], dim=0))
        pyr_l = {s: f[:n] for s, f in pyr.items()}
        pyr_r = {s: f[n:] for s, f in pyr.items()}
        return self._run_backbone(pyr_l, pyr_r)

    def forward(self, left, right, iters: int | None = None, mode: str = "full"):
        if left.shape != right.shape:
            raise ValueError(f"left/right shapes differ: {tuple(left.shape)} vs {tuple(right.shape)}")
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
        n = left.shape[0]
        f2 = self.features.forward_stem(torch.cat([left, right], dim=0))
        pyr_l, pyr_r, scores, cost_feature = self.backbone_from_half(f2[:n], f2[n:])
        if mode == "pretrain-backbone":
            return BackboneFeatures(pyr_l, pyr_r, cost_feature)
        if iters is None:
            iters = self.config.train_iters if self.training else self.config.eval_iters
        return self.refine(scores, cost_feature, pyr_l, iters)

    def refine(self, scores, cost_feature, pyr_l, iters: int) -> DisparityEstimate:
        if iters < 1:
            raise ValueError("iters must be >= 1")
        cfg = self.config
        hd = cfg.hidden_dim
        size = cost_feature.shape[-2:]
        up = lambda f: F.interpolate(f, size=size, mode="bilinear", align_corners=False)  # noqa: E731
        ctx_all = self.context(torch.cat([cost_feature, up(pyr_l[8]), up(pyr_l[16])], dim=1))
        net, ctx, cz, cr, cq = torch.split(ctx_all, hd, dim=1)
        net = torch.tanh(net)
        ctx = F.relu(ctx)

        d0 = soft_argmin(scores)
        d_init = upsample_disparity(4.0 * d0)
        pyramid = CostPyramid(scores, cfg.corr_levels)
        disp = d0[:, None]
        refinements = []
        for _ in range(iters):
            disp = disp.detach()
            corr = pyramid(disp[:, 0], cfg.corr_radius)
            net, delta = self.updater(net, ctx, (cz, cr, cq), disp, corr)
            disp = disp + delta
            refinements.append(upsample_disparity(4.0 * disp[:, 0]))
        return DisparityEstimate(d_init, refinements)


def extract_features(model: StereoNet, image: torch.Tensor) -> dict[int, torch.Tensor]:
    """Feature pyramid of one view (no cross-view enhancement)."""
    if image.dim() == 3:
        image = image[None]
    return model.features(image)


def iterative_refine(model: StereoNet, scores, cost_feature, pyr_left, iters: int) -> list[torch.Tensor]:
    return model.refine(scores, cost_feature, pyr_left, iters).refinements
