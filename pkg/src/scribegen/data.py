"""Manifest ingestion, n-gram cropping, curriculum partitioning and batch sampling."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .alphabet import Alphabet, EncodingError
from .imaging import LINE_HEIGHT, normalize_image, read_grayscale

MAX_INGEST_WIDTH = 2160
MAX_INGEST_CHARS = 88


class ManifestError(ValueError):
    """Raised for unparseable manifests or inconsistent word boxes."""


@dataclass
class TextLineSample:
    """One normalized line image with its transcription and writer index."""

    image: np.ndarray
    transcription: str
    writer_id: int

    def __post_init__(self):
        if self.image.shape[0] != LINE_HEIGHT:
            raise ValueError(f"line images must have height {LINE_HEIGHT}")

    @property
    def width(self) -> int:
        return self.image.shape[1]


@dataclass
class StyleSet:
    """K same-writer exemplar images used as the few-shot appearance condition."""

    images: list
    writer_id: int

    def __post_init__(self):
        if len(self.images) < 1:
            raise ValueError("a style set needs at least one image")
        for img in self.images:
            if img.shape[0] != LINE_HEIGHT:
                raise ValueError(f"style images must have height {LINE_HEIGHT}")

    def __len__(self):
        return len(self.images)


@dataclass(frozen=True)
class CurriculumCategory:
    id: int
    char_range: tuple
    width_range: tuple


# Short to long text-lines; character intervals are closed-left so the shared
# endpoints 24 and 48 belong to the earlier category.
CURRICULUM_CATEGORIES = (
    CurriculumCategory(1, (1, 24), (64, 600)),
    CurriculumCategory(2, (25, 48), (601, 1200)),
    CurriculumCategory(3, (49, 88), (1201, 2160)),
)


def assign_category(sample_or_text) -> CurriculumCategory:
    """Pick the curriculum category from the transcription character count."""
    text = (
        sample_or_text.transcription
        if isinstance(sample_or_text, TextLineSample)
        else sample_or_text
    )
    n = len(text)
    for cat in CURRICULUM_CATEGORIES:
        lo, hi = cat.char_range
        if lo <= n <= hi:
            return cat
    raise ValueError(f"character count {n} is outside the supported range 1-88")


@dataclass
class ManifestRecord:
    image_path: str
    writer_id: str
    transcription: str
    word_boxes: list = field(default_factory=list)  # [(x0, x1)) column spans


@dataclass
class Manifest:
    records: list
    root: str = "."

    def __len__(self):
        return len(self.records)

    def writer_index(self) -> dict:
        """Dense integer index for the opaque writer ids, in sorted order."""
        return {w: i for i, w in enumerate(sorted({r.writer_id for r in self.records}))}


def _escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n")


def _unescape(text: str) -> str:
    out = []
    it = iter(range(len(text)))
    i = 0
    while i < len(text):
        c = text[i]
        if c == "\\" and i + 1 < len(text):
            nxt = text[i + 1]
            if nxt == "t":
                out.append("\t")
            elif nxt == "n":
                out.append("\n")
            elif nxt == "\\":
                out.append("\\")
            else:
                out.append(nxt)
            i += 2
        else:
            out.append(c)
            i += 1
    return "".join(out)


def _format_boxes(boxes) -> str:
    return ",".join(f"{x0}-{x1}" for x0, x1 in boxes)


def _parse_boxes(text: str) -> list:
    boxes = []
    for part in text.split(","):
        if not part:
            continue
        try:
            x0, x1 = part.split("-")
            boxes.append((int(x0), int(x1)))
        except ValueError:
            raise ManifestError(f"malformed word box {part!r}") from None
    return boxes


def save_manifest(manifest: Manifest, path: str) -> None:
    """Write tab-separated records: image_path, writer_id, transcription[, boxes]."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in manifest.records:
            fields = [rec.image_path, rec.writer_id, _escape(rec.transcription)]
            if rec.word_boxes:
                fields.append(_format_boxes(rec.word_boxes))
            fh.write("\t".join(fields) + "\n")


def load_manifest(path: str) -> Manifest:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) not in (3, 4):
                raise ManifestError(f"{path}:{lineno}: expected 3 or 4 tab-separated fields")
            image_path, writer_id, transcription = fields[0], fields[1], _unescape(fields[2])
            if not transcription:
                raise ManifestError(f"{path}:{lineno}: empty transcription")
            boxes = _parse_boxes(fields[3]) if len(fields) == 4 else []
            records.append(ManifestRecord(image_path, writer_id, transcription, boxes))
    return Manifest(records=records, root=os.path.dirname(os.path.abspath(path)))


@dataclass
class IngestReport:
    accepted: int = 0
    rejected: list = field(default_factory=list)  # (image_path, reason)

    def summary(self) -> str:
        lines = [f"accepted {self.accepted} samples, rejected {len(self.rejected)}"]
        lines.extend(f"  {path}: {reason}" for path, reason in self.rejected)
        return "\n".join(lines)


def load_samples(
    manifest: Manifest,
    alphabet: Alphabet,
    max_width: int = MAX_INGEST_WIDTH,
    max_chars: int = MAX_INGEST_CHARS,
):
    """Read, normalize and validate every manifest record.

    Returns (samples, report).  Samples breaking the alphabet or the ingest
    limits are rejected and listed in the report instead of being cropped.
    """
    writer_index = manifest.writer_index()
    samples = []
    report = IngestReport()
    for rec in manifest.records:
        path = os.path.join(manifest.root, rec.image_path)
        try:
            alphabet.validate_text(rec.transcription)
            if not 1 <= len(rec.transcription) <= max_chars:
                raise ManifestError(
                    f"transcription length {len(rec.transcription)} outside 1-{max_chars}"
                )
            image = normalize_image(read_grayscale(path))
            if image.shape[1] > max_width:
                raise ManifestError(f"width {image.shape[1]} exceeds limit {max_width}")
            samples.append(
                TextLineSample(image, rec.transcription, writer_index[rec.writer_id])
            )
            report.accepted += 1
        except (ManifestError, EncodingError, ValueError) as exc:
            report.rejected.append((rec.image_path, str(exc)))
    return samples, report


def ngram_crop(line_image: np.ndarray, word_boxes, word_texts, writer_id: int, order: int):
    """Expand one line into all contiguous 1..order word runs.

    `word_boxes` are [x0, x1) column spans, sorted left to right and
    non-overlapping; each run is cropped as the union of its spans and
    transcribed as the space-joined word texts.
    """
    if len(word_boxes) != len(word_texts):
        raise ManifestError("word box and word text counts differ")
    m = len(word_boxes)
    if m == 0:
        raise ManifestError("a line needs at least one word box")
    width = line_image.shape[1]
    for k, (x0, x1) in enumerate(word_boxes):
        if not 0 <= x0 < x1 <= width:
            raise ManifestError(f"word box {k} = ({x0}, {x1}) outside image of width {width}")
        if k > 0 and x0 < word_boxes[k - 1][1]:
            raise ManifestError(f"word boxes {k - 1} and {k} overlap or are unsorted")
    samples = []
    for length in range(1, min(order, m) + 1):
        for start in range(0, m - length + 1):
            x0 = word_boxes[start][0]
            x1 = word_boxes[start + length - 1][1]
            text = " ".join(word_texts[start : start + length])
            samples.append(TextLineSample(line_image[:, x0:x1].copy(), text, writer_id))
    return samples


def expand_manifest_ngrams(manifest: Manifest, alphabet: Alphabet, order: int = 88):
    """Apply n-gram cropping to every record carrying word boxes.

    Records without boxes pass through as single samples.  Returns the same
    (samples, report) pair as `load_samples`.
    """
    writer_index = manifest.writer_index()
    samples = []
    report = IngestReport()
    for rec in manifest.records:
        path = os.path.join(manifest.root, rec.image_path)
        try:
            alphabet.validate_text(rec.transcription)
            image = normalize_image(read_grayscale(path))
            if not rec.word_boxes:
                samples.append(
                    TextLineSample(image, rec.transcription, writer_index[rec.writer_id])
                )
                report.accepted += 1
                continue
            words = rec.transcription.split(" ")
            if len(words) != len(rec.word_boxes):
                raise ManifestError(
                    f"{len(rec.word_boxes)} boxes for {len(words)} words"
                )
            crops = ngram_crop(
                image, rec.word_boxes, words, writer_index[rec.writer_id], order
            )
            samples.extend(crops)
            report.accepted += len(crops)
        except (ManifestError, EncodingError, ValueError) as exc:
            report.rejected.append((rec.image_path, str(exc)))
    return samples, report


def dataset_statistics(samples) -> str:
    """Plain-text table of counts, width and character-length spread."""
    if not samples:
        return "no samples"
    widths = np.array([s.width for s in samples])
    chars = np.array([len(s.transcription) for s in samples])
    writers = {s.writer_id for s in samples}
    by_cat = {cat.id: 0 for cat in CURRICULUM_CATEGORIES}
    for s in samples:
        try:
            by_cat[assign_category(s).id] += 1
        except ValueError:
            pass
    rows = [
        ("samples", str(len(samples))),
        ("writers", str(len(writers))),
        ("width min/median/max", f"{widths.min()}/{int(np.median(widths))}/{widths.max()}"),
        ("chars min/median/max", f"{chars.min()}/{int(np.median(chars))}/{chars.max()}"),
    ]
    rows.extend((f"category {cid}", str(cnt)) for cid, cnt in sorted(by_cat.items()))
    label_width = max(len(r[0]) for r in rows)
    return "\n".join(f"{label:<{label_width}}  {value}" for label, value in rows)


class BatchSampler:
    """Draws training batches: real samples plus style sets and texts.

    Purely functional over an in-memory sample list; every draw comes from an
    owned RNG so runs are reproducible under a fixed seed.
    """

    def __init__(self, samples, style_set_size: int, seed: int = 0):
        if not samples:
            raise ValueError("cannot sample from an empty dataset")
        self.samples = list(samples)
        self.style_set_size = style_set_size
        self.rng = np.random.default_rng(seed)
        self.by_writer = {}
        for idx, s in enumerate(self.samples):
            self.by_writer.setdefault(s.writer_id, []).append(idx)

    @property
    def num_writers(self) -> int:
        return max(self.by_writer) + 1

    def sample_style_set(self, writer_id: int) -> StyleSet:
        pool = self.by_writer[writer_id]
        picks = self.rng.choice(len(pool), size=self.style_set_size, replace=True)
        return StyleSet([self.samples[pool[i]].image for i in picks], writer_id)

    def next_batch(self, batch_size: int):
        """One mini-batch: (real samples, style sets, texts, batch ids)."""
        ids = self.rng.integers(0, len(self.samples), size=batch_size)
        real = [self.samples[i] for i in ids]
        writers = [self.samples[self.rng.integers(0, len(self.samples))].writer_id
                   for _ in range(batch_size)]
        styles = [self.sample_style_set(w) for w in writers]
        texts = [self.samples[self.rng.integers(0, len(self.samples))].transcription
                 for _ in range(batch_size)]
        return real, styles, texts, [int(i) for i in ids]
