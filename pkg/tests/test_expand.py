import numpy as np
import pytest

from gancd.core import ImageError, bilinear_resize
from gancd.expand import (
    ExpansionConfig,
    MaskDistribution,
    TrainingSetSampler,
    build_training_set,
    partial_sample,
    sample_tiny_mask,
    straight_line_sample,
)


@pytest.fixture
def pair(rng):
    return rng.random((16, 16, 3)), rng.random((16, 16, 3))


def test_straight_line_endpoint(pair):
    i0, i1 = pair
    assert np.array_equal(straight_line_sample(i0, i1, 0, 7), i1)


def test_straight_line_degenerate_pair(pair):
    i0, _ = pair
    for k in range(5):
        assert np.allclose(straight_line_sample(i0, i0, k, 4), i0, atol=1e-15)


def test_straight_line_midpoint(pair):
    i0, i1 = pair
    expected = np.empty_like(i0)
    for idx in np.ndindex(i0.shape):
        expected[idx] = 0.5 * i0[idx] + 0.5 * i1[idx]
    assert np.abs(straight_line_sample(i0, i1, 1, 1) - expected).max() <= 1e-9


def test_straight_line_errors(pair):
    i0, i1 = pair
    with pytest.raises(ValueError):
        straight_line_sample(i0, i1, 5, 4)
    with pytest.raises(ImageError):
        straight_line_sample(i0, i1[:8], 0, 4)


def test_tiny_mask_atoms():
    assert not sample_tiny_mask(8, 8, MaskDistribution(1.0, 0.0), 0).any()
    assert np.all(sample_tiny_mask(8, 8, MaskDistribution(0.0, 1.0), 0) == 1)
    with pytest.raises(ValueError):
        sample_tiny_mask(8, 8, MaskDistribution(0.7, 0.7), 0)


def test_tiny_mask_frequencies():
    m = sample_tiny_mask(100, 1000, MaskDistribution(0.4, 0.4), 7)
    assert abs(np.mean(m == 0) - 0.4) <= 0.01
    assert abs(np.mean(m == 1) - 0.4) <= 0.01
    interior = m[(m > 0) & (m < 1)]
    assert abs(interior.mean() - 0.5) < 0.01


def test_tiny_mask_deterministic():
    d = MaskDistribution()
    assert np.array_equal(sample_tiny_mask(8, 8, d, 3), sample_tiny_mask(8, 8, d, 3))


def test_partial_endpoints(pair):
    i0, i1 = pair
    assert np.array_equal(partial_sample(i0, i1, np.ones((16, 16))), i0)
    assert np.array_equal(partial_sample(i0, i1, np.zeros((16, 16))), i1)
    half = partial_sample(i0, i1, np.full((16, 16), 0.5))
    assert np.abs(half - straight_line_sample(i0, i1, 1, 1)).max() <= 1e-12


def test_partial_loop_oracle(pair, rng):
    i0, i1 = pair
    mask = rng.random((16, 16))
    naive = np.empty_like(i0)
    for r in range(16):
        for c in range(16):
            for ch in range(3):
                naive[r, c, ch] = mask[r, c] * i0[r, c, ch] + (1 - mask[r, c]) * i1[r, c, ch]
    assert np.abs(partial_sample(i0, i1, mask) - naive).max() <= 1e-9
    with pytest.raises(ImageError):
        partial_sample(i0, i1, mask[:8])


@pytest.mark.parametrize("c", [0.0, 0.25, 0.6, 1.0])
def test_constant_mask_is_straight_line(pair, c):
    i0, i1 = pair
    expected = c * i0 + (1 - c) * i1
    assert np.abs(partial_sample(i0, i1, np.full((16, 16), c)) - expected).max() <= 1e-12


def test_build_straight_line_pair(pair):
    i0, i1 = pair
    out = build_training_set(i0, i1, ExpansionConfig("straight_line", n=2))
    assert len(out) == 2
    assert np.array_equal(out[0], i1)
    assert np.abs(out[1] - (i0 / 3 + 2 * i1 / 3)).max() <= 1e-12


def test_build_partial_zero_masks(pair):
    i0, i1 = pair
    out = build_training_set(i0, i1, ExpansionConfig("partial", n=5, mask=MaskDistribution(1.0, 0.0)))
    assert len(out) == 5
    assert all(np.array_equal(x, i1) for x in out)


@pytest.mark.parametrize("strategy", ["straight_line", "partial"])
def test_expanded_images_are_convex(pair, strategy):
    i0, i1 = pair
    lo, hi = np.minimum(i0, i1), np.maximum(i0, i1)
    out = build_training_set(i0, i1, ExpansionConfig(strategy, n=40, seed=2))
    for img in out:
        assert np.all(img >= lo - 1e-12) and np.all(img <= hi + 1e-12)


def test_build_deterministic(pair):
    i0, i1 = pair
    cfg = ExpansionConfig("partial", n=4, seed=9)
    for x, y in zip(build_training_set(i0, i1, cfg), build_training_set(i0, i1, cfg)):
        assert np.array_equal(x, y)


def test_one_mask_cell_changes_only_its_support(pair):
    i0, i1 = pair
    tiny = np.full((4, 4), 0.3)
    other = tiny.copy()
    other[1, 2] = 0.9
    a = partial_sample(i0, i1, bilinear_resize(tiny, 16, 16))
    b = partial_sample(i0, i1, bilinear_resize(other, 16, 16))
    support = bilinear_resize(np.eye(4)[1][:, None] * np.eye(4)[2][None, :], 16, 16) > 0
    changed = np.any(np.abs(a - b) > 1e-12, axis=2)
    assert changed.any()
    assert not (changed & ~support).any()


def test_sampler_batches(pair):
    i0, i1 = pair
    sampler = TrainingSetSampler(i0, i1, ExpansionConfig("partial", n=8, seed=1))
    first = sampler.batch(0, 0, 4)
    assert first.shape == (4, 16, 16, 3)
    assert np.array_equal(first, sampler.batch(0, 0, 4))
    assert not np.array_equal(first, sampler.batch(1, 0, 4))
    line = TrainingSetSampler(i0, i1, ExpansionConfig("straight_line", n=8, seed=1))
    epoch = np.concatenate([line.batch(0, s, 4) for s in range(2)])
    full = np.stack(build_training_set(i0, i1, ExpansionConfig("straight_line", n=8)))
    # one epoch visits every straight-line image exactly once
    matches = [int(np.argmin(np.abs(full - img).reshape(8, -1).max(axis=1))) for img in epoch]
    assert sorted(matches) == list(range(8))
