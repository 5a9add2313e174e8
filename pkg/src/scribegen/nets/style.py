"""Few-shot appearance encoding from channel-stacked style exemplars."""

from __future__ import annotations

import numpy as np
import torch
import torch.nn as nn

from ..imaging import periodic_pad
from .backbones import build_trunk

DOWNSAMPLING = 16


def style_sets_to_tensor(style_sets, pad_width: int, device=None) -> torch.Tensor:
    """Stack style sets into a (B, K, 64, pad_width) batch.

    Every image is periodically padded to `pad_width`; an image wider than
    the target is an error (style exemplars are never shrunk).
    """
    if pad_width % DOWNSAMPLING != 0:
        raise ValueError(f"pad width {pad_width} must be a multiple of {DOWNSAMPLING}")
    sizes = {len(s) for s in style_sets}
    if len(sizes) != 1:
        raise ValueError("all style sets in a batch must hold the same number of images")
    batch = np.stack(
        [
            np.stack([periodic_pad(img, pad_width) for img in style_set.images])
            for style_set in style_sets
        ]
    )
    return torch.as_tensor(batch, dtype=torch.float32, device=device)


class StyleEncoder(nn.Module):
    """Maps K stacked exemplar images to a (C_s, height/16, width/16) feature map."""

    def __init__(self, num_style_images: int, base_width: int = 64, backbone: str = "resnet34"):
        super().__init__()
        self.num_style_images = num_style_images
        self.trunk = build_trunk(backbone, num_style_images, base_width)
        self.out_channels = self.trunk.out_channels

    def forward(self, style_batch: torch.Tensor) -> torch.Tensor:
        if style_batch.ndim != 4 or style_batch.shape[1] != self.num_style_images:
            raise ValueError(
                f"expected a (B, {self.num_style_images}, 64, L) style batch, "
                f"got {tuple(style_batch.shape)}"
            )
        if style_batch.shape[3] % DOWNSAMPLING != 0:
            raise ValueError(
                f"style width {style_batch.shape[3]} is not a multiple of {DOWNSAMPLING}"
            )
        return self.trunk(style_batch)
