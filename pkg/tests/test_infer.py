import numpy as np
import pytest
import torch

from gancd.core import ImageError
from gancd.infer import (
    ComparisonConfig,
    binarize,
    change_map,
    channel_max_reduce,
    pixel_threshold_map,
    rough_difference_map,
    sample_generated,
)
from gancd.nets import ArchitectureConfig, build_generator

SMALL = ArchitectureConfig(latent_dim=8, image_size=16, clip_size=8, base_channels=4)


@pytest.fixture
def gen():
    return build_generator(SMALL, seed=2)


def test_sample_generated_deterministic(gen):
    a = sample_generated(gen, 4, seed=7)
    b = sample_generated(gen, 4, seed=7)
    assert a.shape == (4, 16, 16, 3)
    assert np.array_equal(a, b)
    assert np.all((a > 0) & (a < 1))
    assert not np.array_equal(a, sample_generated(gen, 4, seed=8))


def test_sample_prefix_consistency(gen):
    one = sample_generated(gen, 1, seed=3)
    two = sample_generated(gen, 2, seed=3)
    assert np.allclose(one[0], two[0], atol=1e-6)
    with pytest.raises(ValueError):
        sample_generated(gen, 0, seed=3)


def test_sampling_restores_train_mode(gen):
    gen.train()
    sample_generated(gen, 2, seed=0)
    assert gen.training


def test_pixel_threshold():
    assert pixel_threshold_map(np.array([0.05]), 0.1)[0] == 0
    assert pixel_threshold_map(np.array([0.3]), 0.1)[0] == 0.3
    x = np.random.default_rng(0).random((4, 4, 3))
    assert np.array_equal(pixel_threshold_map(x, 0.0), x)


def test_rough_difference_identical_images(rng):
    img = rng.random((8, 8, 3))
    assert not rough_difference_map([img] * 5).any()


def test_rough_difference_two_images(rng):
    a, b = rng.random((8, 8, 3)), rng.random((8, 8, 3))
    expected = pixel_threshold_map(np.abs(b / b.max() - a / a.max()), 0.1)
    assert np.allclose(rough_difference_map([a, b], 0.1), expected, atol=1e-15)


def test_rough_difference_loop_oracle(rng):
    imgs = [rng.random((6, 5, 3)) for _ in range(5)]
    maxes = [max(v for v in x.ravel()) for x in imgs]
    naive = np.zeros((6, 5, 3))
    for i in range(1, 5):
        for idx in np.ndindex(6, 5, 3):
            d = abs(imgs[i][idx] / maxes[i] - imgs[0][idx] / maxes[0])
            naive[idx] += d if d >= 0.1 else 0.0
    naive /= 4
    assert np.abs(rough_difference_map(imgs, 0.1) - naive).max() <= 1e-9


def test_rough_difference_scale_invariance(rng):
    imgs = [rng.random((6, 6, 3)) for _ in range(4)]
    scaled = list(imgs)
    scaled[2] = imgs[2] * 0.5
    assert np.allclose(rough_difference_map(imgs), rough_difference_map(scaled), atol=1e-12)


def test_rough_difference_errors(rng):
    with pytest.raises(ImageError):
        rough_difference_map([rng.random((4, 4, 3))])
    with pytest.raises(ImageError):
        rough_difference_map([rng.random((4, 4, 3)), np.zeros((4, 4, 3))])


def test_channel_max(rng):
    delta = np.zeros((2, 2, 3))
    delta[1, 0] = (0.1, 0.5, 0.2)
    out = channel_max_reduce(delta)
    assert out[1, 0] == 0.5
    assert not channel_max_reduce(np.zeros((3, 3, 3))).any()
    x = rng.random((5, 4, 3))
    naive = np.array([[max(x[i, j]) for j in range(4)] for i in range(5)])
    assert np.array_equal(channel_max_reduce(x), naive)
    with pytest.raises(ImageError):
        channel_max_reduce(np.zeros((3, 3, 1)))


def test_binarize_boundaries(rng):
    m = rng.random((8, 8))
    m[0, 0] = 1.0
    m[0, 1] = 0.0
    assert binarize(m, 0).all()
    assert np.array_equal(binarize(m, 1), m == 1.0)
    ts = np.sort(rng.random(10))
    for lo, hi in zip(ts, ts[1:]):
        assert not (binarize(m, hi) & ~binarize(m, lo)).any()
    with pytest.raises(ValueError):
        binarize(m, 1.5)


def test_change_map_constant_generator(gen):
    with torch.no_grad():
        for p in gen.parameters():
            p.zero_()
    cm = change_map(gen, ComparisonConfig(n=4))
    assert not cm.any()


def test_change_map_contract(gen):
    cfg = ComparisonConfig(n=6, seed=4)
    cm = change_map(gen, cfg)
    assert cm.shape == (16, 16)
    assert 0 <= cm.min() and cm.max() <= 1
    assert np.array_equal(cm, change_map(gen, cfg))
    with pytest.raises(ValueError):
        change_map(gen, ComparisonConfig(n=1))


def test_half_max_cleanup(gen):
    cm = change_map(gen, ComparisonConfig(n=6, seed=4, pixel_threshold=0.0, half_max_cleanup=True))
    nz = cm[cm > 0]
    assert nz.size and nz.min() >= cm.max() / 2
