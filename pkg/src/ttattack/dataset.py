"""Synthetic desk-scale image dataset plus a loader for labeled folders.

The synthetic images are 32x32 RGB: a noisy gray background carrying one
strongly saturated square patch plus two weakly saturated decoy patches at
other slots.  The class label is the slot (out of ten fixed positions) of
the dominant patch.  Hue varies freely and every patch's value matches the
background's brightness range, so saturation contrast at a position is the
only class evidence; desaturating the dominant patch hands dominance to a
decoy, which is the lever the pixel attack works.  Labels are 1-based,
matching the classifier's class indexing.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .color import hsv_to_rgb
from .images import load_image

__all__ = ["PATCH_SLOTS", "make_desk_dataset", "load_labeled_folder"]

# (row, col) patch centers for the ten classes on the 32x32 canvas
PATCH_SLOTS = [
    (9, 4), (9, 10), (9, 16), (9, 22), (9, 28),
    (22, 4), (22, 10), (22, 16), (22, 22), (22, 28),
]

_PATCH_HALF = 2  # 5x5 patches
_SIZE = 32
_DECOYS = 2


def make_desk_dataset(count: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Generate `count` images and their labels, deterministically from `seed`.

    Returns (images, labels) with images of shape (count, 32, 32, 3) in
    [0, 1] and int labels in {1, ..., 10}.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    images = np.empty((count, _SIZE, _SIZE, 3))
    labels = np.empty(count, dtype=np.int64)
    for i in range(count):
        gray = rng.uniform(0.65, 0.85, size=(_SIZE, _SIZE, 1))
        jitter = rng.uniform(-0.03, 0.03, size=(_SIZE, _SIZE, 3))
        img = np.clip(gray + jitter, 0.0, 1.0)
        slot = int(rng.integers(len(PATCH_SLOTS)))
        decoys = rng.permutation([s for s in range(len(PATCH_SLOTS)) if s != slot])

        def paint(s, sat_lo, sat_hi):
            row, col = PATCH_SLOTS[s]
            row += int(rng.integers(-1, 2))
            col += int(rng.integers(-1, 2))
            color = hsv_to_rgb(np.array([
                rng.uniform(0.0, 360.0),
                rng.uniform(sat_lo, sat_hi),
                rng.uniform(0.65, 0.85),
            ]))
            r0, r1 = max(0, row - _PATCH_HALF), min(_SIZE, row + _PATCH_HALF + 1)
            c0, c1 = max(0, col - _PATCH_HALF), min(_SIZE, col + _PATCH_HALF + 1)
            img[r0:r1, c0:c1] = color

        for s in decoys[:_DECOYS]:
            paint(int(s), 0.30, 0.50)
        paint(slot, 0.85, 1.0)
        images[i] = img
        labels[i] = slot + 1
    return images, labels


def load_labeled_folder(path) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Load a directory of class subfolders of image files.

    Subfolder names sorted lexicographically map to labels 1..C.  Returns
    (images, labels, class_names); all images must share one shape.
    """
    root = Path(path)
    if not root.is_dir():
        raise ValueError(f"not a directory: {root}")
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not class_dirs:
        raise ValueError(f"no class subfolders under {root}")
    images, labels = [], []
    for label, cdir in enumerate(class_dirs, start=1):
        for f in sorted(cdir.iterdir()):
            if f.suffix.lower() in {".png", ".ppm", ".pgm", ".bmp", ".jpg", ".jpeg"}:
                images.append(load_image(f))
                labels.append(label)
    if not images:
        raise ValueError(f"no image files under {root}")
    shapes = {img.shape for img in images}
    if len(shapes) != 1:
        raise ValueError(f"images disagree on shape: {sorted(shapes)}")
    names = [p.name for p in class_dirs]
    return np.stack(images), np.asarray(labels, dtype=np.int64), names
