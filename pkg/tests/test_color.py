import numpy as np
import pytest

from ttattack.color import hsv_to_rgb, rgb_to_hsv

from oracles import hsv_to_rgb_ref, rgb_to_hsv_ref


def test_round_trip_on_lattice():
    axis = np.linspace(0.0, 1.0, 9)
    grid = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3)
    back = hsv_to_rgb(rgb_to_hsv(grid))
    assert np.abs(back - grid).max() <= 1e-9


def test_matches_colorsys_forward():
    rng = np.random.default_rng(0)
    colors = rng.random((200, 3))
    ours = rgb_to_hsv(colors)
    for rgb, hsv in zip(colors, ours):
        ref = rgb_to_hsv_ref(rgb)
        assert np.allclose(hsv, ref, atol=1e-9)


def test_matches_colorsys_backward():
    rng = np.random.default_rng(1)
    hsv = np.stack(
        [rng.uniform(0, 360, 200), rng.random(200), rng.random(200)], axis=-1
    )
    ours = hsv_to_rgb(hsv)
    for inp, rgb in zip(hsv, ours):
        assert np.allclose(rgb, hsv_to_rgb_ref(inp), atol=1e-9)


def test_known_corners():
    assert np.allclose(rgb_to_hsv(np.array([1.0, 0.0, 0.0])), [0.0, 1.0, 1.0])
    assert np.allclose(rgb_to_hsv(np.array([0.0, 1.0, 0.0])), [120.0, 1.0, 1.0])
    assert np.allclose(rgb_to_hsv(np.array([0.0, 0.0, 1.0])), [240.0, 1.0, 1.0])
    assert np.allclose(rgb_to_hsv(np.array([0.5, 0.5, 0.5])), [0.0, 0.0, 0.5])
    assert np.allclose(hsv_to_rgb(np.array([0.0, 0.0, 0.75])), [0.75, 0.75, 0.75])
    assert np.allclose(rgb_to_hsv(np.zeros(3)), [0.0, 0.0, 0.0])


def test_hue_wraps_at_360():
    a = hsv_to_rgb(np.array([360.0, 1.0, 1.0]))
    b = hsv_to_rgb(np.array([0.0, 1.0, 1.0]))
    assert np.allclose(a, b, atol=1e-12)


def test_shapes_are_preserved():
    rng = np.random.default_rng(2)
    img = rng.random((7, 5, 3))
    hsv = rgb_to_hsv(img)
    assert hsv.shape == (7, 5, 3)
    assert hsv_to_rgb(hsv).shape == (7, 5, 3)
