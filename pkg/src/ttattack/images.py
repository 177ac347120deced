"""Loading and saving images as float arrays in [0, 1], RGB channel order."""

from __future__ import annotations

import numpy as np
from PIL import Image as PILImage

__all__ = ["validate_image", "load_image", "save_image", "save_grayscale"]


def validate_image(pixels: np.ndarray) -> np.ndarray:
    pixels = np.asarray(pixels, dtype=np.float64)
    if pixels.ndim != 3 or pixels.shape[2] != 3:
        raise ValueError(f"image must have shape (H, W, 3), got {pixels.shape}")
    if pixels.shape[0] < 1 or pixels.shape[1] < 1:
        raise ValueError("image must have at least one pixel")
    if pixels.min() < 0.0 or pixels.max() > 1.0:
        raise ValueError("pixel values must lie in [0, 1]")
    return pixels


def load_image(path) -> np.ndarray:
    """Read an 8-bit PNG/PPM (or anything PIL handles) into [0, 1] floats."""
    with PILImage.open(path) as img:
        arr = np.asarray(img.convert("RGB"), dtype=np.float64)
    return arr / 255.0


def save_image(pixels: np.ndarray, path):
    """Write a [0, 1] float image as an 8-bit file; format follows the suffix."""
    pixels = validate_image(pixels)
    data = np.rint(pixels * 255.0).astype(np.uint8)
    PILImage.fromarray(data, mode="RGB").save(path)


def save_grayscale(values: np.ndarray, path):
    """Write a 2-D array as an 8-bit grayscale file, min-max normalized."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ValueError(f"grayscale export needs a 2-D array, got {values.shape}")
    lo, hi = float(values.min()), float(values.max())
    if hi > lo:
        norm = (values - lo) / (hi - lo)
    else:
        norm = np.zeros_like(values)
    data = np.rint(norm * 255.0).astype(np.uint8)
    PILImage.fromarray(data, mode="L").save(path)
