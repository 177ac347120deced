import numpy as np
import pytest

from ttattack.tt import (
    LIKELIHOOD_FLOOR,
    TTTensor,
    tt_ascent_run,
    tt_ascent_step,
    tt_get,
    tt_get_many,
    tt_log_likelihood_grad,
    tt_random_nonneg,
    tt_sample,
)

from oracles import all_indices, dense_from_cores, loglike_fd_grad


def test_random_nonneg_shape_contract():
    t = tt_random_nonneg([3, 3], rank=1, seed=5)
    assert [c.shape for c in t.cores] == [(1, 3, 1), (1, 3, 1)]
    assert all(c.min() > 0 for c in t.cores)


def test_random_nonneg_rank_capping_large_dimension():
    t = tt_random_nonneg([3] * 5000, rank=5, seed=0)
    assert t.ranks[:4] == [1, 3, 5, 5]
    assert t.ranks[-4:] == [5, 5, 3, 1]


def test_random_nonneg_dense_entries_positive():
    t = tt_random_nonneg([2, 2, 2], rank=2, seed=7)
    dense = dense_from_cores(t.cores)
    assert dense.shape == (2, 2, 2)
    assert dense.min() > 0


def test_random_nonneg_deterministic_and_seed_sensitive():
    a = tt_random_nonneg([4, 3, 2], rank=3, seed=11)
    b = tt_random_nonneg([4, 3, 2], rank=3, seed=11)
    c = tt_random_nonneg([4, 3, 2], rank=3, seed=12)
    assert all(np.array_equal(x, y) for x, y in zip(a.cores, b.cores))
    assert any(not np.array_equal(x, y) for x, y in zip(a.cores, c.cores))


def test_random_nonneg_rejects_bad_arguments():
    with pytest.raises(ValueError):
        tt_random_nonneg([], rank=2, seed=0)
    with pytest.raises(ValueError):
        tt_random_nonneg([3, 3], rank=0, seed=0)
    with pytest.raises(ValueError):
        tt_random_nonneg([3, 0], rank=1, seed=0)


def test_constructor_validates_chain():
    with pytest.raises(ValueError):
        TTTensor([np.ones((2, 3, 1))])  # boundary rank != 1
    with pytest.raises(ValueError):
        TTTensor([np.ones((1, 3, 2)), np.ones((3, 3, 1))])  # bond mismatch
    with pytest.raises(ValueError):
        TTTensor([np.ones((1, 3))])  # not 3 axes


def test_get_identity_chain():
    t = TTTensor([np.ones((1, 4, 1)), np.ones((1, 3, 1)), np.ones((1, 2, 1))])
    for row in all_indices(t.mode_sizes):
        assert tt_get(t, row) == 1.0


def test_get_matches_matrix_product_for_two_modes():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(4, 3))
    b = rng.normal(size=(3, 5))
    t = TTTensor([a[None].transpose(0, 1, 2), b[:, :, None]])
    ab = a @ b
    for i in range(4):
        for j in range(5):
            assert tt_get(t, [i + 1, j + 1]) == pytest.approx(ab[i, j], rel=1e-14)


def test_get_matches_dense_contraction():
    t = tt_random_nonneg([3, 3, 3, 3], rank=3, seed=1)
    dense = dense_from_cores(t.cores)
    for row in all_indices(t.mode_sizes):
        ref = dense[tuple(row - 1)]
        assert abs(tt_get(t, row) - ref) <= 1e-12 * abs(ref)


def test_get_many_matches_get():
    t = tt_random_nonneg([2, 4, 3], rank=2, seed=2)
    rows = all_indices(t.mode_sizes)
    values = tt_get_many(t, rows)
    singles = np.array([tt_get(t, row) for row in rows])
    assert np.array_equal(values, singles)


def test_get_rejects_out_of_range_indices():
    t = tt_random_nonneg([3, 3], rank=1, seed=0)
    with pytest.raises(IndexError):
        tt_get(t, [0, 1])
    with pytest.raises(IndexError):
        tt_get(t, [1, 4])
    with pytest.raises(IndexError):
        tt_get(t, [1, 1, 1])


# -- sampling --


def test_sample_uniform_tensor_frequencies():
    t = TTTensor([np.ones((1, 3, 1)), np.ones((1, 3, 1))])
    rng = np.random.default_rng(10)
    draws = tt_sample(t, 10_000, rng)
    flat = (draws[:, 0] - 1) * 3 + (draws[:, 1] - 1)
    freq = np.bincount(flat, minlength=9) / 10_000
    sigma = np.sqrt((1 / 9) * (8 / 9) / 10_000)
    assert np.all(np.abs(freq - 1 / 9) <= 4 * sigma)


def test_sample_rank_one_product_distribution():
    p1 = np.array([0.6, 0.3, 0.1])
    p2 = np.array([0.2, 0.8])
    t = TTTensor([p1[None, :, None], p2[None, :, None]])
    rng = np.random.default_rng(11)
    draws = tt_sample(t, 20_000, rng)
    flat = (draws[:, 0] - 1) * 2 + (draws[:, 1] - 1)
    freq = np.bincount(flat, minlength=6) / 20_000
    joint = np.outer(p1, p2).ravel()
    sigma = np.sqrt(joint * (1 - joint) / 20_000)
    assert np.all(np.abs(freq - joint) <= 4 * np.maximum(sigma, 1e-4))


def test_sample_matches_normalized_dense_distribution():
    t = tt_random_nonneg([2, 2, 2], rank=2, seed=4)
    dense = dense_from_cores(t.cores).ravel()
    target = dense / dense.sum()
    rng = np.random.default_rng(12)
    draws = tt_sample(t, 100_000, rng)
    flat = np.ravel_multi_index((draws - 1).T, t.mode_sizes)
    freq = np.bincount(flat, minlength=8) / 100_000
    assert 0.5 * np.abs(freq - target).sum() <= 0.02


def test_sample_clips_negative_weights():
    # one mode value has a negative weight; it must never be drawn
    core = np.array([[[1.0], [-2.0], [3.0]]])
    t = TTTensor([core])
    rng = np.random.default_rng(13)
    draws = tt_sample(t, 5000, rng)[:, 0]
    counts = np.bincount(draws - 1, minlength=3)
    assert counts[1] == 0
    assert abs(counts[0] / 5000 - 0.25) < 0.03
    assert abs(counts[2] / 5000 - 0.75) < 0.03


def test_sample_degenerate_mode_falls_back_to_uniform():
    core = np.array([[[-1.0], [-2.0], [-3.0]]])  # all weights clip to zero
    t = TTTensor([core])
    rng = np.random.default_rng(14)
    draws = tt_sample(t, 9000, rng)[:, 0]
    freq = np.bincount(draws - 1, minlength=3) / 9000
    assert np.all(np.abs(freq - 1 / 3) < 0.05)


def test_sample_rejects_bad_count():
    t = tt_random_nonneg([3], rank=1, seed=0)
    with pytest.raises(ValueError):
        tt_sample(t, 0, np.random.default_rng(0))


def test_sample_never_materializes_large_instances():
    t = tt_random_nonneg([3] * 2000, rank=4, seed=6)
    rng = np.random.default_rng(15)
    draws = tt_sample(t, 5, rng)
    assert draws.shape == (5, 2000)
    assert draws.min() >= 1 and draws.max() <= 3


# -- log-likelihood gradient --


def test_grad_single_mode_is_scaled_indicator():
    core = np.array([[[0.5], [2.0], [0.25]]])
    t = TTTensor([core])
    (g,) = tt_log_likelihood_grad(t, np.array([[2]]))
    expected = np.zeros_like(core)
    expected[0, 1, 0] = 1.0 / 2.0
    assert np.allclose(g, expected, rtol=1e-13)


def test_grad_matches_finite_differences():
    t = tt_random_nonneg([3, 3, 3], rank=2, seed=8)
    rng = np.random.default_rng(16)
    batch = tt_sample(t, 5, rng)
    grads = tt_log_likelihood_grad(t, batch)
    fd = loglike_fd_grad(t, batch)
    for g, ref in zip(grads, fd):
        hit = np.abs(ref) > 1e-9
        assert np.all(np.abs(g[hit] - ref[hit]) <= 1e-5 * np.abs(ref[hit]))
        assert np.allclose(g[~hit], 0.0, atol=1e-9)


def test_grad_zero_at_unhit_slices():
    t = tt_random_nonneg([4, 4], rank=2, seed=9)
    grads = tt_log_likelihood_grad(t, np.array([[1, 2]]))
    assert np.all(grads[0][:, [1, 2, 3], :] == 0.0)
    assert np.all(grads[1][:, [0, 2, 3], :] == 0.0)


def test_grad_duplicate_sample_doubles_exactly():
    t = tt_random_nonneg([3, 2, 3], rank=2, seed=10)
    row = np.array([[2, 1, 3]])
    single = tt_log_likelihood_grad(t, row)
    double = tt_log_likelihood_grad(t, np.vstack([row, row]))
    assert all(np.array_equal(2 * a, b) for a, b in zip(single, double))


def test_grad_clamps_tiny_values_to_floor():
    core = np.array([[[1e-310], [1.0]]])
    t = TTTensor([core])
    (g,) = tt_log_likelihood_grad(t, np.array([[1]]))
    assert np.isfinite(g).all()
    assert g[0, 0, 0] == pytest.approx(1.0 / LIKELIHOOD_FLOOR, rel=1e-12)


# -- ascent --


def test_ascent_step_zero_rate_is_identity():
    t = tt_random_nonneg([3, 3], rank=2, seed=11)
    grads = tt_log_likelihood_grad(t, np.array([[1, 1]]))
    out = tt_ascent_step(t, grads, 0.0)
    assert all(np.array_equal(a, b) for a, b in zip(out.cores, t.cores))


def test_ascent_step_is_reversible():
    t = tt_random_nonneg([3, 3], rank=2, seed=12)
    grads = tt_log_likelihood_grad(t, np.array([[2, 3]]))
    back = tt_ascent_step(tt_ascent_step(t, grads, 0.3), grads, -0.3)
    for a, b in zip(back.cores, t.cores):
        assert np.allclose(a, b, atol=1e-12)


def test_ascent_step_rejects_shape_mismatch():
    t = tt_random_nonneg([3, 3], rank=2, seed=13)
    grads = [np.zeros((1, 3, 2)), np.zeros((2, 4, 1))]
    with pytest.raises(ValueError):
        tt_ascent_step(t, grads, 0.1)


def test_ascent_increases_likelihood_each_step():
    t = tt_random_nonneg([3, 3, 3], rank=2, seed=14)
    rng = np.random.default_rng(17)
    batch = tt_sample(t, 4, rng)

    def loss(tensor):
        return sum(np.log(tt_get(tensor, row)) for row in batch)

    current = t
    previous = loss(current)
    for _ in range(100):
        grads = tt_log_likelihood_grad(current, batch)
        current = tt_ascent_step(current, grads, 0.01)
        value = loss(current)
        assert value > previous
        previous = value


def test_ascent_run_matches_composed_updates():
    rng = np.random.default_rng(18)
    for sizes, rank in ([4], 3), ([3, 5], 2), ([3, 4, 2, 3], 3), ([3] * 40, 5):
        t = tt_random_nonneg(sizes, rank, seed=19)
        batch = tt_sample(t, 6, rng)
        fused = tt_ascent_run(t, batch, 15, 0.02)
        composed = t
        for _ in range(15):
            grads = tt_log_likelihood_grad(composed, batch)
            composed = tt_ascent_step(composed, grads, 0.02)
        for a, b in zip(fused.cores, composed.cores):
            assert np.allclose(a, b, rtol=1e-11, atol=1e-13)


# -- serialization --


def test_serialization_roundtrip_is_exact():
    t = tt_random_nonneg([4, 2, 5], rank=3, seed=20)
    back = TTTensor.from_bytes(t.to_bytes())
    assert back.mode_sizes == t.mode_sizes
    assert back.ranks == t.ranks
    assert all(np.array_equal(a, b) for a, b in zip(back.cores, t.cores))


def test_serialization_layout():
    t = tt_random_nonneg([2, 3], rank=2, seed=21)
    data = t.to_bytes()
    assert data[:4] == b"TTT1"
    header = np.frombuffer(data, dtype="<i8", count=1 + 2 + 3, offset=4)
    assert header[0] == 2  # dimension count
    assert list(header[1:3]) == [2, 3]  # mode sizes
    assert list(header[3:6]) == t.ranks
    payload = np.frombuffer(data, dtype="<f8", offset=4 + 6 * 8)
    expected = np.concatenate([c.ravel() for c in t.cores])
    assert np.array_equal(payload, expected)


def test_serialization_rejects_garbage():
    t = tt_random_nonneg([2, 2], rank=1, seed=22)
    data = t.to_bytes()
    with pytest.raises(ValueError):
        TTTensor.from_bytes(b"XXXX" + data[4:])
    with pytest.raises(ValueError):
        TTTensor.from_bytes(data[:-8])
    with pytest.raises(ValueError):
        TTTensor.from_bytes(data + b"\x00" * 8)


def test_file_roundtrip(tmp_path):
    t = tt_random_nonneg([3, 3, 3], rank=2, seed=23)
    path = tmp_path / "tensor.ttt"
    t.save(path)
    back = TTTensor.load(path)
    assert all(np.array_equal(a, b) for a, b in zip(back.cores, t.cores))
