"""Image synthesis from fused style and content features."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from .content import ContentFeatures

ADAIN_EPS = 1e-5
UPSAMPLE_STAGES = 4


def adain(z: torch.Tensor, alpha: torch.Tensor, beta: torch.Tensor) -> torch.Tensor:
    """Renormalize each channel of `z` to scale `alpha` and shift `beta`.

    Statistics are per channel over spatial positions; a small stabilizer in
    the denominator makes constant channels map to `beta` instead of NaN.
    """
    if alpha.shape[-1] != z.shape[1] or beta.shape[-1] != z.shape[1]:
        raise ValueError(
            f"AdaIN parameter length {alpha.shape[-1]}/{beta.shape[-1]} does not "
            f"match channel count {z.shape[1]}"
        )
    if alpha.ndim == 1:
        alpha = alpha.expand(z.shape[0], -1)
        beta = beta.expand(z.shape[0], -1)
    mean = z.mean(dim=(2, 3), keepdim=True)
    var = z.var(dim=(2, 3), unbiased=False, keepdim=True)
    normalized = (z - mean) / torch.sqrt(var + ADAIN_EPS)
    return alpha[:, :, None, None] * normalized + beta[:, :, None, None]


class AdaInResBlock(nn.Module):
    """conv -> AdaIN -> ReLU -> conv -> AdaIN with an additive skip."""

    def __init__(self, channels: int):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, 1, 1)
        self.conv2 = nn.Conv2d(channels, channels, 3, 1, 1)
        self.relu = nn.ReLU(inplace=True)

    def forward(self, x, pair_a, pair_b):
        h = adain(self.conv1(x), *pair_a)
        h = self.conv2(self.relu(h))
        h = adain(h, *pair_b)
        return x + h


@dataclass
class GeneratedImage:
    """Synthesized line in tanh range with its conditioning provenance."""

    raster: np.ndarray  # (64, width), values in [-1, 1]
    writer_id: int
    text: str


class Generator(nn.Module):
    """Two AdaIN residual blocks followed by four nearest-neighbor 2x upsamplings.

    The residual blocks consume the four (scale, shift) pairs in network
    order; the upsampling stack halves the channel count at every stage and a
    final tanh produces a single-channel image 16x the feature height/width.
    """

    def __init__(self, in_channels: int, width: int = 256):
        super().__init__()
        if width % 2**UPSAMPLE_STAGES != 0:
            raise ValueError(f"generator width must be divisible by {2**UPSAMPLE_STAGES}")
        self.width = width
        self.entry = nn.Conv2d(in_channels, width, 3, 1, 1)
        self.res1 = AdaInResBlock(width)
        self.res2 = AdaInResBlock(width)
        ups = []
        channels = width
        for _ in range(UPSAMPLE_STAGES):
            ups += [
                nn.Upsample(scale_factor=2, mode="nearest"),
                nn.Conv2d(channels, channels // 2, 3, 1, 1),
                nn.ReLU(inplace=True),
            ]
            channels //= 2
        self.upsample = nn.Sequential(*ups)
        self.to_image = nn.Conv2d(channels, 1, 3, 1, 1)

    def forward(self, content: ContentFeatures, style_map: torch.Tensor) -> torch.Tensor:
        if content.char_map.shape[2:] != style_map.shape[2:]:
            raise ValueError(
                f"content grid {tuple(content.char_map.shape[2:])} does not match "
                f"style grid {tuple(style_map.shape[2:])}"
            )
        pairs = content.adain_pairs
        h = self.entry(torch.cat([style_map, content.char_map], dim=1))
        h = self.res1(h, pairs[0], pairs[1])
        h = self.res2(h, pairs[2], pairs[3])
        return torch.tanh(self.to_image(self.upsample(h)))
