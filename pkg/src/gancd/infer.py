"""Turn a trained generator into a change map.

Sample a batch of generated images, normalize each by its global maximum,
difference every image against the first one, zero out weak differences,
average, and keep the strongest channel per pixel.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .core import ImageError, global_max_normalize
from .nets import Generator, generate, sample_latent


@dataclass
class ComparisonConfig:
    n: int = 64
    pixel_threshold: float = 0.1
    seed: int = 0
    # drop pixels below half of the map maximum (off unless asked for)
    half_max_cleanup: bool = False

    def validate(self) -> None:
        if self.n < 2:
            raise ValueError("need at least 2 generated images to compare")
        if not 0 <= self.pixel_threshold < 1:
            raise ValueError("pixel_threshold must lie in [0, 1)")


def sample_generated(gen: Generator, n: int, seed: int) -> np.ndarray:
    """``n`` images (``n x H x W x C``) from U[0,1] latents, evaluation mode."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = torch.Generator().manual_seed(seed)
    was_training = gen.training
    gen.eval()
    try:
        with torch.no_grad():
            z = sample_latent(n, gen.cfg.latent_dim, rng, next(gen.parameters()).dtype)
            out = generate(gen, z)
    finally:
        gen.train(was_training)
    return out.double().numpy()


def pixel_threshold_map(img, cutoff: float) -> np.ndarray:
    arr = np.asarray(img, dtype=np.float64)
    return np.where(arr < cutoff, 0.0, arr)


def rough_difference_map(images, cutoff: float = 0.1) -> np.ndarray:
    images = [np.asarray(x, dtype=np.float64) for x in images]
    if len(images) < 2:
        raise ImageError("need at least 2 images for a difference map")
    if any(x.shape != images[0].shape for x in images):
        raise ImageError("generated images must share one shape")
    ref = global_max_normalize(images[0])
    total = np.zeros_like(ref)
    for x in images[1:]:
        total += pixel_threshold_map(np.abs(global_max_normalize(x) - ref), cutoff)
    return total / (len(images) - 1)


def channel_max_reduce(delta) -> np.ndarray:
    arr = np.asarray(delta, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ImageError(f"expected a 3-channel map, got shape {arr.shape}")
    return arr.max(axis=2)


def binarize(intensity, t: float) -> np.ndarray:
    if not 0 <= t <= 1:
        raise ValueError("threshold must lie in [0, 1]")
    return np.asarray(intensity) >= t


def change_map_from_images(images, cmp: ComparisonConfig) -> np.ndarray:
    images = np.asarray(images)
    delta = rough_difference_map(images, cmp.pixel_threshold)
    intensity = channel_max_reduce(delta) if delta.shape[2] == 3 else delta.max(axis=2)
    if cmp.half_max_cleanup and intensity.max() > 0:
        intensity = np.where(intensity < intensity.max() / 2, 0.0, intensity)
    return intensity


def change_map(gen: Generator, cmp: ComparisonConfig) -> np.ndarray:
    cmp.validate()
    return change_map_from_images(sample_generated(gen, cmp.n, cmp.seed), cmp)
