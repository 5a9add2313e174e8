"""Convolutional trunks with a total downsampling factor of 16.

Stopping at stride 16 matches the four 2x upsamplings of the generator, so a
height-64 input maps to a height-4 feature grid and back.  Group
normalization keeps the trunks free of running statistics, which makes the
two-phase optimization discipline exact (all trainable state is parameters).
"""

from __future__ import annotations

import torch.nn as nn


def group_norm(channels: int) -> nn.GroupNorm:
    for groups in (8, 4, 2, 1):
        if channels % groups == 0:
            return nn.GroupNorm(groups, channels)
    raise AssertionError("unreachable")


_norm = group_norm


class BasicBlock(nn.Module):
    def __init__(self, in_channels, out_channels, stride=1):
        super().__init__()
        self.conv1 = nn.Conv2d(in_channels, out_channels, 3, stride, 1, bias=False)
        self.norm1 = _norm(out_channels)
        self.conv2 = nn.Conv2d(out_channels, out_channels, 3, 1, 1, bias=False)
        self.norm2 = _norm(out_channels)
        self.relu = nn.ReLU(inplace=True)
        if stride != 1 or in_channels != out_channels:
            self.shortcut = nn.Sequential(
                nn.Conv2d(in_channels, out_channels, 1, stride, bias=False),
                _norm(out_channels),
            )
        else:
            self.shortcut = nn.Identity()

    def forward(self, x):
        out = self.relu(self.norm1(self.conv1(x)))
        out = self.norm2(self.conv2(out))
        return self.relu(out + self.shortcut(x))


class ResNetTrunk(nn.Module):
    """ResNet34 layout truncated after the third stage (stride 16).

    Stage depths are the 3/4/6 pattern; `base_width` scales the channel
    counts (64 reproduces the standard widths, smaller values suit CPU runs).
    """

    def __init__(self, in_channels: int, base_width: int = 64):
        super().__init__()
        b = base_width
        self.stem = nn.Sequential(
            nn.Conv2d(in_channels, b, 7, 2, 3, bias=False),
            _norm(b),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(3, 2, 1),
        )
        self.layer1 = self._stage(b, b, blocks=3, stride=1)
        self.layer2 = self._stage(b, 2 * b, blocks=4, stride=2)
        self.layer3 = self._stage(2 * b, 4 * b, blocks=6, stride=2)
        self.out_channels = 4 * b

    @staticmethod
    def _stage(in_channels, out_channels, blocks, stride):
        layers = [BasicBlock(in_channels, out_channels, stride)]
        layers.extend(BasicBlock(out_channels, out_channels) for _ in range(blocks - 1))
        return nn.Sequential(*layers)

    def forward(self, x):
        return self.layer3(self.layer2(self.layer1(self.stem(x))))


class VGGTrunk(nn.Module):
    """VGG19 convolutional layout truncated after the fourth pool (stride 16)."""

    PLAN = (2, 2, 4, 4)  # convs per stage before each pool

    def __init__(self, in_channels: int, base_width: int = 64):
        super().__init__()
        layers = []
        channels = in_channels
        width = base_width
        for convs in self.PLAN:
            for _ in range(convs):
                layers += [
                    nn.Conv2d(channels, width, 3, 1, 1, bias=False),
                    _norm(width),
                    nn.ReLU(inplace=True),
                ]
                channels = width
            layers.append(nn.MaxPool2d(2, 2))
            width = min(2 * width, 8 * base_width)
        self.features = nn.Sequential(*layers)
        self.out_channels = channels

    def forward(self, x):
        return self.features(x)


def build_trunk(name: str, in_channels: int, base_width: int):
    if name == "resnet34":
        return ResNetTrunk(in_channels, base_width)
    if name == "vgg19":
        return VGGTrunk(in_channels, base_width)
    raise ValueError(f"unknown backbone {name!r} (expected 'resnet34' or 'vgg19')")
