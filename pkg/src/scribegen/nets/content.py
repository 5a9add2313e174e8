"""Text conditioning: character-wise feature map plus global AdaIN parameters."""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn


@dataclass
class ContentFeatures:
    """Character-wise map aligned to the style grid plus 4 (scale, shift) pairs."""

    char_map: torch.Tensor          # (B, C_c, h_f, w_f)
    adain_pairs: tuple              # 4 pairs of (B, C_g) tensors

    def __post_init__(self):
        if len(self.adain_pairs) != 4:
            raise ValueError("expected exactly 4 AdaIN parameter pairs")


def repeat_counts(length: int, width: int) -> torch.Tensor:
    """How many columns each of `length` positions owns on a `width` grid.

    Counts differ by at most one and the earlier positions take the extra
    column, so repetitions of one character stay contiguous.
    """
    if width < length:
        raise ValueError(
            f"feature width {width} cannot host a text of padded length {length}"
        )
    base, extra = divmod(width, length)
    counts = torch.full((length,), base, dtype=torch.long)
    counts[:extra] += 1
    return counts


def encode_charwise(embedded: torch.Tensor, width: int, height: int) -> torch.Tensor:
    """Stretch per-character embeddings (B, T, n) into a (B, n, height, width) map."""
    counts = repeat_counts(embedded.shape[1], width).to(embedded.device)
    stretched = torch.repeat_interleave(embedded, counts, dim=1)  # (B, width, n)
    map2d = stretched.permute(0, 2, 1).unsqueeze(2)               # (B, n, 1, width)
    return map2d.expand(-1, -1, height, -1).contiguous()


class ContentEncoder(nn.Module):
    """Embeds padded texts and produces both conditioning routes.

    The character-wise route is a parameter-free repetition of the embeddings
    and may run at any padded length up to `max_length`; the global route is
    an MLP over the full fixed-length embedding, split into 8 equal pieces
    forming 4 ordered (scale, shift) pairs.
    """

    def __init__(
        self,
        num_classes: int,
        max_length: int,
        embed_dim: int = 64,
        adain_dim: int = 256,
        hidden_dim: int = 1024,
    ):
        super().__init__()
        self.max_length = max_length
        self.embed_dim = embed_dim
        self.adain_dim = adain_dim
        self.embedding = nn.Embedding(num_classes, embed_dim)
        self.global_mlp = nn.Sequential(
            nn.Linear(max_length * embed_dim, hidden_dim),
            nn.ReLU(inplace=True),
            nn.Linear(hidden_dim, hidden_dim),
            nn.ReLU(inplace=True),
            nn.Linear(hidden_dim, 8 * adain_dim),
        )

    def embed(self, indices: torch.Tensor) -> torch.Tensor:
        """(B, T) class indices -> (B, T, n) embedding vectors."""
        return self.embedding(indices)

    def encode_global(self, embedded: torch.Tensor) -> tuple:
        """(B, max_length, n) -> 4 pairs of (B, adain_dim) scale/shift vectors."""
        if embedded.shape[1] != self.max_length:
            raise ValueError(
                f"global encoding needs padded length {self.max_length}, "
                f"got {embedded.shape[1]}"
            )
        flat = embedded.reshape(embedded.shape[0], -1)
        pieces = self.global_mlp(flat).chunk(8, dim=1)
        return tuple((pieces[2 * i], pieces[2 * i + 1]) for i in range(4))

    def forward(
        self, indices: torch.Tensor, width: int, height: int, charwise_length=None
    ) -> ContentFeatures:
        """Build ContentFeatures for a padded index batch (B, max_length).

        `charwise_length` bounds the slice fed to the character-wise route
        (curriculum stages keep it at the stage text length); the global
        route always consumes the full padded sequence.
        """
        if indices.shape[1] != self.max_length:
            raise ValueError(
                f"expected padded length {self.max_length}, got {indices.shape[1]}"
            )
        embedded = self.embed(indices)
        length = charwise_length or min(self.max_length, width)
        char_map = encode_charwise(embedded[:, :length], width, height)
        return ContentFeatures(char_map=char_map, adain_pairs=self.encode_global(embedded))
