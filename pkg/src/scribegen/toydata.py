"""Procedural toy handwriting dataset for desk-scale runs.

Each synthetic "writer" is a fixed parameter bundle (slant, stroke thickness,
glyph scale, baseline wobble, ink darkness) applied to a built-in 5x7
dot-matrix glyph renderer, so no system fonts are involved and writer
identity is learnable by construction.  Images are written as ordinary white-background
grayscale PNGs; the normal ingestion path handles inversion.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass

import cv2
import numpy as np

from .data import Manifest, ManifestRecord, save_manifest
from .imaging import LINE_HEIGHT

# fmt: off
GLYPHS = {
    "a": ("     ", "     ", " ### ", "    #", " ####", "#   #", " ####"),
    "b": ("#    ", "#    ", "#### ", "#   #", "#   #", "#   #", "#### "),
    "c": ("     ", "     ", " ####", "#    ", "#    ", "#    ", " ####"),
    "d": ("    #", "    #", " ####", "#   #", "#   #", "#   #", " ####"),
    "e": ("     ", "     ", " ### ", "#   #", "#####", "#    ", " ####"),
    "f": ("  ## ", " #   ", "#### ", " #   ", " #   ", " #   ", " #   "),
    "g": ("     ", " ####", "#   #", "#   #", " ####", "    #", " ### "),
    "h": ("#    ", "#    ", "#### ", "#   #", "#   #", "#   #", "#   #"),
    "i": ("  #  ", "     ", " ##  ", "  #  ", "  #  ", "  #  ", " ### "),
    "j": ("   # ", "     ", "  ## ", "   # ", "   # ", "#  # ", " ##  "),
    "k": ("#    ", "#    ", "#  # ", "# #  ", "##   ", "# #  ", "#  # "),
    "l": (" ##  ", "  #  ", "  #  ", "  #  ", "  #  ", "  #  ", " ### "),
    "m": ("     ", "     ", "## # ", "# # #", "# # #", "# # #", "# # #"),
    "n": ("     ", "     ", "#### ", "#   #", "#   #", "#   #", "#   #"),
    "o": ("     ", "     ", " ### ", "#   #", "#   #", "#   #", " ### "),
    "p": ("     ", "     ", "#### ", "#   #", "#### ", "#    ", "#    "),
    "q": ("     ", "     ", " ####", "#   #", " ####", "    #", "    #"),
    "r": ("     ", "     ", "# ## ", "##   ", "#    ", "#    ", "#    "),
    "s": ("     ", "     ", " ####", "#    ", " ### ", "    #", "#### "),
    "t": (" #   ", " #   ", "#### ", " #   ", " #   ", " #  #", "  ## "),
    "u": ("     ", "     ", "#   #", "#   #", "#   #", "#   #", " ####"),
    "v": ("     ", "     ", "#   #", "#   #", "#   #", " # # ", "  #  "),
    "w": ("     ", "     ", "#   #", "# # #", "# # #", "# # #", " # # "),
    "x": ("     ", "     ", "#   #", " # # ", "  #  ", " # # ", "#   #"),
    "y": ("     ", "     ", "#   #", "#   #", " ####", "    #", " ### "),
    "z": ("     ", "     ", "#####", "   # ", "  #  ", " #   ", "#####"),
    " ": ("     ",) * 7,
}
# fmt: on

WORD_LIST = (
    "air bank bell bird blue boat bone book cave chair city cloud coal coast "
    "corn dawn deep door dust earth farm fern fire fish flat fog fox gate glass "
    "gold grain grass green hall hand hill home horn ice iron lake lamp land "
    "leaf light lime long loud low marsh mask mill mist moon moss moth nest "
    "night north oak owl park path peak pine plain pond rain reed ridge river "
    "road rock roof root rose salt sand sea seed shade ship shore silk sky "
    "snow song south star stone storm sun swan tide town tree vale view wave "
    "well west wind wolf wood wool yard"
).split()

GRID_ROWS = 7
GRID_COLS = 5
ADVANCE_CELLS = GRID_COLS + 1


@dataclass(frozen=True)
class WriterStyle:
    slant: float      # horizontal shear per vertical pixel
    thickness: int    # stroke thickness in pixels
    scale: int        # pixels per glyph grid cell
    wobble: float     # baseline oscillation amplitude in pixels
    darkness: float   # peak ink darkness in [0, 1]


SLANT_LEVELS = (-0.4, -0.2, 0.0, 0.2, 0.4)
THICKNESS_LEVELS = (1, 2, 3)
SCALE_LEVELS = (3, 4, 5)
WOBBLE_LEVELS = (0.0, 1.2, 2.4)
DARKNESS_LEVELS = (0.6, 0.8, 1.0)

# Strokes connect each on-cell to these grid neighbors.
_NEIGHBORS = ((0, 1), (1, 0), (1, 1), (1, -1))


def writer_styles(num_writers: int, rng: np.random.Generator) -> list:
    """Assign each writer a distinct parameter bundle from a shuffled grid."""
    combos = list(
        itertools.product(
            SLANT_LEVELS, THICKNESS_LEVELS, SCALE_LEVELS, WOBBLE_LEVELS, DARKNESS_LEVELS
        )
    )
    if num_writers > len(combos):
        raise ValueError(f"at most {len(combos)} distinct toy writers are supported")
    order = rng.permutation(len(combos))
    return [WriterStyle(*combos[order[i]]) for i in range(num_writers)]


def line_advance(text: str, style: WriterStyle) -> int:
    """Upper bound on the rendered ink width of `text`."""
    pen = len(text) * ADVANCE_CELLS * style.scale
    shear = int(abs(style.slant) * GRID_ROWS * style.scale) + 1
    return pen + shear + 2 * style.thickness


def render_line(text: str, style: WriterStyle, rng: np.random.Generator):
    """Rasterize `text` with the writer's bundle.

    On-cells of each glyph become stroke segments joining neighboring cells,
    so every thickness level yields connected, visible letterforms.  Returns
    (uint8 image of height 64, word boxes as [x0, x1) spans).
    """
    margin = 3 + style.thickness + int(max(0.0, -style.slant) * GRID_ROWS * style.scale)
    width = margin + line_advance(text, style) + margin
    canvas = np.full((LINE_HEIGHT, width), 255, dtype=np.uint8)

    glyph_h = GRID_ROWS * style.scale
    top = (LINE_HEIGHT - glyph_h) // 2
    baseline = top + glyph_h
    phase = rng.uniform(0.0, 2.0 * math.pi)

    pen = margin
    boxes = []
    word_span = None
    for k, char in enumerate(text):
        wobble = style.wobble * math.sin(phase + 0.7 * k)
        y0 = top + wobble + rng.normal(0.0, 0.3)
        if char == " ":
            if word_span is not None:
                boxes.append(word_span)
                word_span = None
            pen += ADVANCE_CELLS * style.scale
            continue

        grid = GLYPHS[char]
        on_cells = [
            (r, c)
            for r in range(GRID_ROWS)
            for c in range(GRID_COLS)
            if grid[r][c] == "#"
        ]
        on_set = set(on_cells)
        ink = style.darkness * rng.uniform(0.82, 1.0)
        value = int(round(255.0 * (1.0 - ink)))

        def cell_point(r, c):
            y = y0 + (r + 0.5) * style.scale
            x = pen + (c + 0.5) * style.scale + style.slant * (baseline - y)
            return int(round(x)), int(round(y))

        lo = hi = None
        for r, c in on_cells:
            p0 = cell_point(r, c)
            cv2.circle(canvas, p0, max(0, (style.thickness - 1) // 2), value, -1)
            lo = p0[0] if lo is None else min(lo, p0[0])
            hi = p0[0] if hi is None else max(hi, p0[0])
            for dr, dc in _NEIGHBORS:
                if (r + dr, c + dc) in on_set:
                    p1 = cell_point(r + dr, c + dc)
                    cv2.line(canvas, p0, p1, value, style.thickness)
                    lo, hi = min(lo, p1[0]), max(hi, p1[0])
        if lo is not None:
            span = (max(0, lo - style.thickness), min(width, hi + style.thickness + 1))
            if word_span is None:
                word_span = span
            else:
                word_span = (min(word_span[0], span[0]), max(word_span[1], span[1]))
        pen += ADVANCE_CELLS * style.scale
    if word_span is not None:
        boxes.append(word_span)

    last_ink = max((b[1] for b in boxes), default=margin)
    canvas = canvas[:, : max(LINE_HEIGHT, last_ink + margin)]
    return canvas, boxes


def sample_text(
    rng: np.random.Generator,
    style: WriterStyle,
    max_chars: int,
    max_width: int,
    max_words: int,
) -> str:
    """Pick words from the bundled list so the rendered line fits the limits."""
    n_words = int(rng.integers(1, max_words + 1))
    words = [WORD_LIST[rng.integers(0, len(WORD_LIST))] for _ in range(n_words)]
    while words:
        text = " ".join(words)
        margin = 3 + style.thickness + int(abs(style.slant) * GRID_ROWS * style.scale)
        if len(text) <= max_chars and line_advance(text, style) + 2 * margin <= max_width:
            return text
        words.pop()
    # Even one word may overflow tight limits; fall back to a short one.
    for word in sorted(WORD_LIST, key=len):
        if len(word) <= max_chars and line_advance(word, style) + 40 <= max_width:
            return word
    raise ValueError("limits too tight to render any bundled word")


def make_toy_dataset(
    num_writers: int,
    samples_per_writer: int,
    seed: int,
    out_dir: str,
    max_chars: int = 24,
    max_width: int = 2160,
    max_words: int = 3,
    styles=None,
) -> Manifest:
    """Render a deterministic multi-writer dataset under `out_dir`.

    Produces `images/*.png` plus a `manifest.tsv` carrying word boxes, so the
    output feeds both plain ingestion and n-gram cropping.  `styles` replaces
    the default well-separated parameter grid with explicit WriterStyle
    bundles (useful for studies that need writers with subtle differences).
    """
    if num_writers < 2:
        raise ValueError("a toy dataset needs at least 2 writers")
    rng = np.random.default_rng(seed)
    if styles is None:
        styles = writer_styles(num_writers, rng)
    elif len(styles) != num_writers:
        raise ValueError("need exactly one style bundle per writer")

    image_dir = os.path.join(out_dir, "images")
    os.makedirs(image_dir, exist_ok=True)
    records = []
    for w, style in enumerate(styles):
        for i in range(samples_per_writer):
            text = sample_text(rng, style, max_chars, max_width, max_words)
            image, boxes = render_line(text, style, rng)
            name = f"w{w:03d}_{i:04d}.png"
            if not cv2.imwrite(os.path.join(image_dir, name), image):
                raise OSError(f"failed to write {name}")
            records.append(
                ManifestRecord(
                    image_path=os.path.join("images", name),
                    writer_id=f"w{w:03d}",
                    transcription=text,
                    word_boxes=boxes,
                )
            )
    manifest = Manifest(records=records, root=out_dir)
    save_manifest(manifest, os.path.join(out_dir, "manifest.tsv"))
    return manifest
