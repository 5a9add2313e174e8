"""Transformer text-line recognizer used both as a training signal and standalone."""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn as nn

from .backbones import ResNetTrunk


class SinusoidalEncoding(nn.Module):
    def __init__(self, dim: int, max_positions: int = 4096):
        super().__init__()
        position = torch.arange(max_positions).unsqueeze(1)
        freq = torch.exp(torch.arange(0, dim, 2) * (-math.log(10000.0) / dim))
        table = torch.zeros(max_positions, dim)
        table[:, 0::2] = torch.sin(position * freq)
        table[:, 1::2] = torch.cos(position * freq)
        self.register_buffer("table", table, persistent=False)

    def forward(self, x):
        return x + self.table[: x.shape[1]].unsqueeze(0)


@dataclass
class DecodeResult:
    text: str
    confidences: list


class Recognizer(nn.Module):
    """ResNet trunk + transformer encoder over width, causal transformer decoder.

    Teacher-forced decoding runs all positions in parallel: position i sees
    the image features and the targets before i only (inputs are the targets
    shifted right behind a padding-symbol start token).
    """

    def __init__(
        self,
        num_classes: int,
        max_length: int,
        pad_index: int,
        d_model: int = 512,
        num_heads: int = 8,
        ff_dim: int = 1024,
        dropout: float = 0.1,
        trunk_width: int = 64,
        num_blocks: int = 4,
        process_width: int = 0,
    ):
        super().__init__()
        self.num_classes = num_classes
        self.max_length = max_length
        self.pad_index = pad_index
        # Canonical processing width: narrower inputs are right-padded with
        # background zeros so batched training, generated images and
        # single-image decoding all see the same spatial extent.
        self.process_width = process_width
        self.trunk = ResNetTrunk(1, trunk_width)
        self.feature_proj = nn.Linear(self.trunk.out_channels * 4, d_model)
        self.positional = SinusoidalEncoding(d_model)
        self.encoder = nn.TransformerEncoder(
            nn.TransformerEncoderLayer(
                d_model, num_heads, ff_dim, dropout, batch_first=True
            ),
            num_layers=num_blocks,
            enable_nested_tensor=False,
        )
        self.embedding = nn.Embedding(num_classes, d_model)
        self.decoder = nn.TransformerDecoder(
            nn.TransformerDecoderLayer(
                d_model, num_heads, ff_dim, dropout, batch_first=True
            ),
            num_layers=num_blocks,
        )
        self.head = nn.Linear(d_model, num_classes)

    def encode_image(self, images: torch.Tensor) -> torch.Tensor:
        """(B, 1, 64, W) -> (B, W'/16, d_model); height folds into channels.

        Inputs narrower than the canonical processing width are right-padded
        with zeros first.
        """
        if images.ndim != 4 or images.shape[2] != 64:
            raise ValueError(f"expected a (B, 1, 64, W) batch, got {tuple(images.shape)}")
        if self.process_width and images.shape[3] < self.process_width:
            pad = self.process_width - images.shape[3]
            images = torch.nn.functional.pad(images, (0, pad))
        fmap = self.trunk(images)                        # (B, C, 4, W'/16)
        b, c, h, w = fmap.shape
        seq = fmap.permute(0, 3, 1, 2).reshape(b, w, c * h)
        return self.encoder(self.positional(self.feature_proj(seq)))

    def _decode(self, memory: torch.Tensor, decoder_input: torch.Tensor) -> torch.Tensor:
        t = decoder_input.shape[1]
        mask = torch.triu(
            torch.full((t, t), float("-inf"), device=decoder_input.device), diagonal=1
        )
        emb = self.positional(self.embedding(decoder_input))
        return self.head(self.decoder(emb, memory, tgt_mask=mask))

    def forward(self, images: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
        """Teacher-forced per-position distributions, shape (B, T, num_classes)."""
        if targets.shape[1] != self.max_length:
            raise ValueError(
                f"targets must be padded to length {self.max_length}, "
                f"got {targets.shape[1]}"
            )
        decoder_input = torch.roll(targets, shifts=1, dims=1)
        decoder_input[:, 0] = self.pad_index
        memory = self.encode_image(images)
        logits = self._decode(memory, decoder_input)
        return torch.softmax(logits, dim=-1)

    @torch.no_grad()
    def decode_greedy(self, image: torch.Tensor, alphabet) -> DecodeResult:
        """Autoregressive argmax decode of one (1, 64, W) image; stops at padding."""
        training = self.training
        self.eval()
        try:
            memory = self.encode_image(image.unsqueeze(0))
            tokens = [self.pad_index]
            confidences = []
            out = []
            for step in range(self.max_length):
                seq = torch.tensor([tokens], dtype=torch.long, device=image.device)
                probs = torch.softmax(self._decode(memory, seq)[0, -1], dim=-1)
                best = int(probs.argmax())
                if best == self.pad_index:
                    break
                out.append(best)
                confidences.append(float(probs[best]))
                tokens.append(best)
        finally:
            self.train(training)
        return DecodeResult(text=alphabet.decode(out), confidences=confidences)


def content_loss(
    output: torch.Tensor,
    targets: torch.Tensor,
    pad_index: int,
    smoothing: float = 0.0,
) -> torch.Tensor:
    """KL divergence from the target distribution over the text positions.

    With one-hot targets (smoothing 0) this reduces to cross-entropy.  The
    first padding position acts as the end-of-text marker and is kept in the
    loss (greedy decoding relies on a learned stop); all padding beyond it is
    ignored, so extending the padding never changes the value.
    """
    if output.shape[:2] != targets.shape:
        raise ValueError(
            f"output {tuple(output.shape)} does not match targets {tuple(targets.shape)}"
        )
    keep = targets != pad_index
    if not bool(keep.any()):
        raise ValueError("targets consist entirely of padding symbols")
    lengths = keep.sum(dim=1)
    rows = torch.arange(targets.shape[0], device=targets.device)
    in_range = lengths < targets.shape[1]
    keep[rows[in_range], lengths[in_range]] = True
    num_classes = output.shape[-1]
    log_pred = torch.log(output.clamp(min=1e-12))
    if smoothing > 0.0:
        target_dist = torch.full_like(output, smoothing / (num_classes - 1))
        target_dist.scatter_(-1, targets.unsqueeze(-1), 1.0 - smoothing)
        entropy = -(target_dist * torch.log(target_dist.clamp(min=1e-12))).sum(-1)
        per_position = -(target_dist * log_pred).sum(-1) - entropy
    else:
        per_position = -log_pred.gather(-1, targets.unsqueeze(-1)).squeeze(-1)
    return per_position[keep].mean()
