"""White-box attribution maps and top-pixel selection.

Two map builders are provided: the plain input-gradient map and the
path-integrated gradient map, which averages input gradients along the
straight line from a baseline image to the input and scales by the
input-baseline difference.  Both aggregate the three color channels into one
score per pixel, because the attack perturbs whole pixels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .images import save_grayscale, validate_image

__all__ = [
    "AttributionMap",
    "saliency",
    "integrated_gradients",
    "integrated_gradient_channels",
    "select_top_pixels",
    "save_attribution",
]


@dataclass(frozen=True)
class AttributionMap:
    """Per-pixel significance scores for one class."""

    scores: np.ndarray  # (H, W)
    class_index: int
    baseline_kind: str  # "black", "noise", or "none" for plain gradients


def _gradient(classifier, image, class_index):
    fn = getattr(classifier, "class_score_gradient", None)
    if fn is None:
        raise TypeError("attribution needs a differentiable classifier")
    return fn(image, class_index)


def saliency(classifier, image: np.ndarray, class_index: int) -> AttributionMap:
    """Input-gradient map; channels aggregated by summing absolute values."""
    image = validate_image(image)
    grad = _gradient(classifier, image, class_index)
    return AttributionMap(
        scores=np.abs(grad).sum(axis=2), class_index=class_index, baseline_kind="none"
    )


def _baseline(image: np.ndarray, kind: str, rng) -> np.ndarray:
    if kind == "black":
        return np.zeros_like(image)
    if kind == "noise":
        rng = np.random.default_rng(0) if rng is None else rng
        return rng.random(image.shape)
    raise ValueError(f"unknown baseline kind {kind!r}")


def integrated_gradient_channels(
    classifier,
    image: np.ndarray,
    class_index: int,
    steps: int = 15,
    baseline_kind: str = "black",
    rng=None,
) -> np.ndarray:
    """Per-channel path-integrated gradients, shape (H, W, 3).

    Right-endpoint Riemann sum with `steps` nodes:
        a = (x - x') * (1/steps) * sum_{t=1..steps} grad f(x' + (t/steps)(x - x'))
    As steps grows the total over all entries approaches f(x) - f(x').
    """
    image = validate_image(image)
    if steps < 1:
        raise ValueError("steps must be >= 1")
    base = _baseline(image, baseline_kind, rng)
    diff = image - base
    fractions = np.arange(1, steps + 1) / steps
    batch_fn = getattr(classifier, "batch_score_gradient", None)
    if batch_fn is not None:
        flat_base = base.reshape(1, -1)
        flat_diff = diff.reshape(1, -1)
        points = flat_base + fractions[:, None] * flat_diff
        grads = batch_fn(points, class_index)
        total = grads.mean(axis=0).reshape(image.shape)
    else:
        total = np.zeros_like(image)
        for f in fractions:
            total += _gradient(classifier, base + f * diff, class_index)
        total /= steps
    return diff * total


def integrated_gradients(
    classifier,
    image: np.ndarray,
    class_index: int,
    steps: int = 15,
    baseline_kind: str = "black",
    rng=None,
) -> AttributionMap:
    """Integrated-gradient map; channels aggregated by signed sum."""
    channels = integrated_gradient_channels(
        classifier, image, class_index, steps, baseline_kind, rng
    )
    return AttributionMap(
        scores=channels.sum(axis=2),
        class_index=class_index,
        baseline_kind=baseline_kind,
    )


def select_top_pixels(amap: AttributionMap, d_hat: int) -> np.ndarray:
    """The d_hat highest-scoring (row, col) positions, ties in row-major order.

    Returns an int64 array of shape (d_hat, 2) sorted by descending score.
    """
    scores = np.asarray(amap.scores, dtype=np.float64)
    h, w = scores.shape
    if not (1 <= d_hat <= h * w):
        raise ValueError(f"d_hat must lie in 1..{h * w}")
    flat_order = np.argsort(-scores.reshape(-1), kind="stable")[:d_hat]
    return np.stack([flat_order // w, flat_order % w], axis=1).astype(np.int64)


def save_attribution(amap: AttributionMap, path):
    """Export the map as a min-max normalized grayscale image file."""
    save_grayscale(amap.scores, path)
