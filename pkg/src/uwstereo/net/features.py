from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

SCALES = (2, 4, 8, 16)


class ShapeError(ValueError):
    pass


def check_divisible(height: int, width: int, factor: int = 16):
    if height % factor or width % factor:
        pad_h = (-height) % factor
        pad_w = (-width) % factor
        raise ShapeError(
            f"image size {height}x{width} is not divisible by {factor}; "
            f"pad by {pad_h} rows and {pad_w} columns"
        )


def conv(cin, cout, stride=1, k=3):
    return nn.Sequential(nn.Conv2d(cin, cout, k, stride, k // 2), nn.LeakyReLU(0.1, inplace=True))


class ResBlock(nn.Module):
    def __init__(self, ch):
        super().__init__()
        self.conv1 = nn.Conv2d(ch, ch, 3, 1, 1)
        self.conv2 = nn.Conv2d(ch, ch, 3, 1, 1)

    def forward(self, x):
        y = F.leaky_relu(self.conv1(x), 0.1)
        return F.leaky_relu(x + self.conv2(y), 0.1)


class FeatureExtractor(nn.Module):
    """Shallow strided encoder producing features at 1/2, 1/4, 1/8 and 1/16 resolution.

    The stem (image -> 1/2) is separate from the rest so masked pretraining
    can substitute features at 1/2 before the deeper stages run.
    """

    def __init__(self, base_channels: int = 32):
        super().__init__()
        c = base_channels
        self.channels = {2: c // 2, 4: c, 8: c * 3 // 2, 16: c * 2}
        self.stem = nn.Sequential(conv(3, c // 2, stride=2), ResBlock(c // 2))
        self.down4 = nn.Sequential(conv(c // 2, c, stride=2), ResBlock(c))
        self.down8 = nn.Sequential(conv(c, self.channels[8], stride=2), ResBlock(self.channels[8]))
        self.down16 = nn.Sequential(conv(self.channels[8], self.channels[16], stride=2),
                                    ResBlock(self.channels[16]))

    def forward_stem(self, image: torch.Tensor) -> torch.Tensor:
        check_divisible(image.shape[-2], image.shape[-1])
        return self.stem(image * 2.0 - 1.0)

    def forward_from_half(self, f2: torch.Tensor) -> dict[int, torch.Tensor]:
        f4 = self.down4(f2)
        f8 = self.down8(f4)
        f16 = self.down16(f8)
        return {2: f2, 4: f4, 8: f8, 16: f16}

    def forward(self, image: torch.Tensor) -> dict[int, torch.Tensor]:
        """Pyramid {scale: (B, C_s, H/s, W/s)} for an RGB batch in [0, 1]."""
        return self.forward_from_half(self.forward_stem(image))
