"""Symbol inventory shared by the text encoders, the recognizer and the data pipeline."""

from __future__ import annotations

import string
from dataclasses import dataclass, field


# Lower/upper case letters, digits, punctuation and the plain space.
DEFAULT_SYMBOLS = (
    string.ascii_lowercase + string.ascii_uppercase + string.digits + string.punctuation + " "
)


class EncodingError(ValueError):
    """Raised when a text contains a symbol outside the alphabet."""


@dataclass(frozen=True)
class Alphabet:
    """Ordered set of printable symbols plus one trailing padding symbol.

    The padding symbol is not printable and never appears inside `symbols`;
    it owns the last row of embedding tables and the last class index of the
    recognizer output space.
    """

    symbols: str = DEFAULT_SYMBOLS
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError("alphabet symbols must be unique")
        object.__setattr__(self, "_index", {c: i for i, c in enumerate(self.symbols)})

    def __len__(self):
        return len(self.symbols)

    @property
    def epsilon_index(self) -> int:
        return len(self.symbols)

    @property
    def num_classes(self) -> int:
        """Symbol count including the padding symbol."""
        return len(self.symbols) + 1

    def __contains__(self, char: str) -> bool:
        return char in self._index

    def index_of(self, char: str) -> int:
        try:
            return self._index[char]
        except KeyError:
            raise EncodingError(f"character {char!r} is not in the alphabet") from None

    def encode(self, text: str) -> list[int]:
        return [self.index_of(c) for c in text]

    def decode(self, indices) -> str:
        """Map class indices back to text, dropping padding symbols."""
        eps = self.epsilon_index
        out = []
        for i in indices:
            i = int(i)
            if i == eps:
                continue
            if not 0 <= i < len(self.symbols):
                raise EncodingError(f"class index {i} is outside the alphabet")
            out.append(self.symbols[i])
        return "".join(out)

    def validate_text(self, text: str) -> None:
        for c in text:
            if c not in self._index:
                raise EncodingError(f"character {c!r} is not in the alphabet")


@dataclass(frozen=True)
class PaddedText:
    """Fixed-length symbol index sequence; positions >= true_length hold the pad symbol."""

    indices: tuple
    true_length: int

    def __len__(self):
        return len(self.indices)


def pad_text(text: str, max_length: int, alphabet: Alphabet) -> PaddedText:
    """Encode `text` and pad it with the padding symbol up to `max_length`."""
    if not text:
        raise EncodingError("text must contain at least one character")
    if len(text) > max_length:
        raise EncodingError(
            f"text of length {len(text)} exceeds the maximum length {max_length}"
        )
    idx = alphabet.encode(text)
    idx.extend([alphabet.epsilon_index] * (max_length - len(text)))
    return PaddedText(indices=tuple(idx), true_length=len(text))
