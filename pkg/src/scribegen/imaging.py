"""Raster utilities: height normalization, intensity inversion, periodic padding, PNG io.

All in-memory line images follow one convention: float32 arrays of shape
(64, width) with values in [0, 1], background near 0 and ink near 1
(inverted intensities).  PNG files on disk keep the usual white-background
8-bit convention; the converters live here.
"""

from __future__ import annotations

import os

import cv2
import numpy as np

LINE_HEIGHT = 64


class InvalidImageError(ValueError):
    """Raised for empty or malformed raster inputs."""


class WidthExceedsTargetError(ValueError):
    """Raised when a padding target is narrower than the source image."""


def normalize_image(raw: np.ndarray) -> np.ndarray:
    """Turn an 8-bit grayscale raster into a height-64 inverted float image.

    The raster is rescaled to height 64 with bilinear resampling (width keeps
    the aspect ratio, at least 1 px) and intensities are mapped to 1 - I/255
    so strokes end up bright on a dark background.
    """
    if raw is None or raw.ndim != 2 or raw.shape[0] == 0 or raw.shape[1] == 0:
        raise InvalidImageError("expected a non-empty 2-d grayscale raster")
    h, w = raw.shape
    inverted = 1.0 - raw.astype(np.float32) / 255.0
    if h != LINE_HEIGHT:
        new_w = max(1, int(round(w * LINE_HEIGHT / h)))
        inverted = cv2.resize(
            inverted, (new_w, LINE_HEIGHT), interpolation=cv2.INTER_LINEAR
        )
    return np.clip(inverted, 0.0, 1.0)


def periodic_pad(image: np.ndarray, target_width: int) -> np.ndarray:
    """Tile `image` rightward until it is exactly `target_width` columns wide.

    Column c of the output equals column c % w of the input.  Shrinking is
    never performed; a target narrower than the image is an error.
    """
    if image.ndim != 2 or image.shape[1] == 0:
        raise InvalidImageError("expected a non-empty 2-d image")
    w = image.shape[1]
    if target_width < w:
        raise WidthExceedsTargetError(
            f"target width {target_width} is narrower than the image width {w}"
        )
    if target_width == w:
        return image.copy()
    return np.take(image, np.arange(target_width) % w, axis=1)


def round_up_to_multiple(width: int, multiple: int = 16) -> int:
    return ((width + multiple - 1) // multiple) * multiple


def read_grayscale(path: str) -> np.ndarray:
    raw = cv2.imread(os.fspath(path), cv2.IMREAD_GRAYSCALE)
    if raw is None:
        raise InvalidImageError(f"cannot read image file {path!r}")
    return raw


def write_grayscale(path: str, raw: np.ndarray) -> None:
    if not cv2.imwrite(os.fspath(path), raw):
        raise InvalidImageError(f"cannot write image file {path!r}")


def to_png_intensities(normalized: np.ndarray) -> np.ndarray:
    """Undo the inverted [0, 1] convention back to white-background uint8."""
    return np.round((1.0 - np.clip(normalized, 0.0, 1.0)) * 255.0).astype(np.uint8)


def generated_to_normalized(raster: np.ndarray) -> np.ndarray:
    """Map a tanh-range [-1, 1] generated raster onto the [0, 1] data convention."""
    return (np.asarray(raster, dtype=np.float32) + 1.0) / 2.0
