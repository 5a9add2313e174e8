"""Inference helpers: single-line generation, style interpolation, PNG export."""

from __future__ import annotations

import glob
import os

import numpy as np
import torch

from .data import StyleSet
from .imaging import (
    normalize_image,
    read_grayscale,
    round_up_to_multiple,
    to_png_intensities,
    write_grayscale,
)
from .nets import GeneratedImage, style_sets_to_tensor
from .training import SynthesisModel


def load_style_images(style_dir: str) -> list:
    paths = sorted(glob.glob(os.path.join(style_dir, "*.png")))
    if not paths:
        raise FileNotFoundError(f"no PNG style images under {style_dir!r}")
    return [normalize_image(read_grayscale(p)) for p in paths]


def build_style_set(images, set_size: int, writer_id: int = 0, seed: int = 0) -> StyleSet:
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(images), size=set_size, replace=len(images) < set_size)
    return StyleSet([images[i] for i in picks], writer_id)


def default_pad_width(model: SynthesisModel) -> int:
    return round_up_to_multiple(model.config.stages("stage_max_widths")[-1])


@torch.no_grad()
def generate_line(
    model: SynthesisModel,
    text: str,
    style_set: StyleSet,
    pad_width: int | None = None,
) -> GeneratedImage:
    model.eval()
    pad_width = pad_width or default_pad_width(model)
    style_tensor = style_sets_to_tensor([style_set], pad_width)
    raster = model.generate([text], style_tensor)[0, 0].numpy()
    return GeneratedImage(raster=raster, writer_id=style_set.writer_id, text=text)


@torch.no_grad()
def interpolate_styles(
    model: SynthesisModel,
    text: str,
    style_a: StyleSet,
    style_b: StyleSet,
    steps: int,
    pad_width: int | None = None,
) -> list:
    """Generate along the straight line between two style feature maps.

    The endpoints bypass the blend entirely so they match plain generation
    bit for bit (floating-point lerp can flip signed zeros).
    """
    if steps < 2:
        raise ValueError("interpolation needs at least 2 steps")
    model.eval()
    pad_width = pad_width or default_pad_width(model)
    map_a = model.style(style_sets_to_tensor([style_a], pad_width))
    map_b = model.style(style_sets_to_tensor([style_b], pad_width))
    width, height = map_a.shape[3], map_a.shape[2]
    indices = model.encode_texts([text])
    features = model.content(indices, width, height)
    images = []
    for k in range(steps):
        lam = k / (steps - 1)
        if lam == 0.0:
            blended = map_a
        elif lam == 1.0:
            blended = map_b
        else:
            blended = (1.0 - lam) * map_a + lam * map_b
        raster = model.generator(features, blended)[0, 0].numpy()
        provenance = style_a.writer_id if lam <= 0.5 else style_b.writer_id
        images.append(GeneratedImage(raster=raster, writer_id=provenance, text=text))
    return images


def write_generated(image: GeneratedImage, out_dir: str, stem: str) -> str:
    """Write one PNG (white background) plus a provenance TSV row."""
    os.makedirs(out_dir, exist_ok=True)
    png_path = os.path.join(out_dir, f"{stem}.png")
    normalized = (image.raster + 1.0) / 2.0
    write_grayscale(png_path, to_png_intensities(normalized))
    with open(os.path.join(out_dir, "provenance.tsv"), "a", encoding="utf-8") as fh:
        safe_text = image.text.replace("\t", "\\t").replace("\n", "\\n")
        fh.write(f"{stem}.png\t{image.writer_id}\t{safe_text}\n")
    return png_path
