"""Realism discriminator and writer classifier with their losses.

Both critics share the same trunk layout (one conv layer, six residual
blocks with LeakyReLU and average pooling, global average pooling) and
differ only in the final linear head.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

PROB_FLOOR = 1e-7


class LeakyResBlock(nn.Module):
    def __init__(self, in_channels, out_channels):
        super().__init__()
        self.conv1 = nn.Conv2d(in_channels, out_channels, 3, 1, 1)
        self.conv2 = nn.Conv2d(out_channels, out_channels, 3, 1, 1)
        self.act = nn.LeakyReLU(0.2, inplace=True)
        if in_channels != out_channels:
            self.shortcut = nn.Conv2d(in_channels, out_channels, 1)
        else:
            self.shortcut = nn.Identity()

    def forward(self, x):
        h = self.conv2(self.act(self.conv1(x)))
        return self.act(h + self.shortcut(x))


class CriticNet(nn.Module):
    """Shared critic trunk; widths cap at 8x the base so depth stays cheap."""

    def __init__(self, head_dim: int, base_width: int = 32):
        super().__init__()
        b = base_width
        plan = [b, 2 * b, 4 * b, 8 * b, 8 * b, 8 * b]
        self.conv1 = nn.Conv2d(1, b, 3, 1, 1)
        blocks = []
        channels = b
        for out in plan:
            blocks += [nn.AvgPool2d(2, ceil_mode=True), LeakyResBlock(channels, out)]
            channels = out
        self.blocks = nn.Sequential(*blocks)
        self.head = nn.Linear(channels, head_dim)

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        if images.ndim != 4 or images.shape[1] != 1:
            raise ValueError(f"expected a (B, 1, 64, W) batch, got {tuple(images.shape)}")
        h = self.blocks(self.conv1(images))
        return self.head(h.mean(dim=(2, 3)))


class Discriminator(CriticNet):
    def __init__(self, base_width: int = 32):
        super().__init__(head_dim=1, base_width=base_width)

    def discriminate(self, images: torch.Tensor) -> torch.Tensor:
        """Per-image probability of being real, in (0, 1)."""
        return torch.sigmoid(self(images)).squeeze(1)


class WriterClassifier(CriticNet):
    def __init__(self, num_writers: int, base_width: int = 32):
        super().__init__(head_dim=num_writers, base_width=base_width)
        self.num_writers = num_writers

    def classify(self, images: torch.Tensor) -> torch.Tensor:
        return self(images)


def discriminative_loss(real_probs: torch.Tensor, fake_probs: torch.Tensor) -> torch.Tensor:
    """mean log D(real) + mean log(1 - D(fake)); the discriminator ascends this."""
    if real_probs.numel() == 0 or fake_probs.numel() == 0:
        raise ValueError("both batches must be non-empty")
    real_term = torch.log(real_probs.clamp(min=PROB_FLOOR)).mean()
    fake_term = torch.log((1.0 - fake_probs).clamp(min=PROB_FLOOR)).mean()
    return real_term + fake_term


def generator_adversarial_loss(fake_probs: torch.Tensor) -> torch.Tensor:
    """Non-saturating surrogate: descend -log D(fake) instead of log(1 - D(fake))."""
    return -torch.log(fake_probs.clamp(min=PROB_FLOOR)).mean()


def writer_loss(logits: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    """Cross-entropy between predicted writer distribution and the true writer."""
    if int(targets.max()) >= logits.shape[1]:
        raise ValueError(
            f"writer target {int(targets.max())} outside the {logits.shape[1]}-way head"
        )
    return F.cross_entropy(logits, targets)
