"""Grow a training set out of a single image pair.

Every generated image is a per-pixel convex combination of the two inputs.
Straight-line sampling uses one global weight per image; partial sampling
uses a weight map obtained by bilinearly upsampling a tiny random mask, so
different regions mix in different proportions.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .core import ImageError, bilinear_resize


@dataclass(frozen=True)
class MaskDistribution:
    """Atoms at 0 and 1, remaining mass uniform on (0, 1)."""

    p_zero: float = 0.4
    p_one: float = 0.4

    def validate(self) -> None:
        if not (0 <= self.p_zero <= 1 and 0 <= self.p_one <= 1):
            raise ValueError("mask probabilities must lie in [0, 1]")
        if self.p_zero + self.p_one > 1 + 1e-12:
            raise ValueError("p_zero + p_one must not exceed 1")


@dataclass
class ExpansionConfig:
    strategy: Literal["straight_line", "partial"] = "partial"
    n: int = 3200
    # None means image size / 16 on each side
    mask_size: tuple[int, int] | None = None
    mask: MaskDistribution = field(default_factory=MaskDistribution)
    seed: int = 0

    def validate(self) -> None:
        if self.strategy not in ("straight_line", "partial"):
            raise ValueError(f"unknown expansion strategy {self.strategy!r}")
        if self.n < 2:
            raise ValueError("training set size must be at least 2")
        if self.mask_size is not None and min(self.mask_size) < 2:
            raise ValueError("tiny mask must be at least 2x2")
        self.mask.validate()

    def tiny_mask_shape(self, height: int, width: int) -> tuple[int, int]:
        if self.mask_size is not None:
            return tuple(self.mask_size)
        return max(2, height // 16), max(2, width // 16)


def _pair(i0, i1) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(i0, dtype=np.float64)
    b = np.asarray(i1, dtype=np.float64)
    if a.shape != b.shape:
        raise ImageError(f"image pair shapes differ: {a.shape} vs {b.shape}")
    return a, b


def straight_line_sample(i0, i1, k: int, n: int) -> np.ndarray:
    """``k/(n+1) * i0 + (1 - k/(n+1)) * i1``."""
    if not 0 <= k <= n:
        raise ValueError(f"k={k} outside [0, {n}]")
    a, b = _pair(i0, i1)
    t = k / (n + 1)
    return t * a + (1 - t) * b


def sample_tiny_mask(h: int, w: int, dist: MaskDistribution, seed) -> np.ndarray:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return _draw_masks(rng, 1, h, w, dist)[0]


def _draw_masks(rng: np.random.Generator, count: int, h: int, w: int, dist: MaskDistribution) -> np.ndarray:
    dist.validate()
    u = rng.random((count, h, w))
    v = rng.random((count, h, w))
    return np.where(u < dist.p_zero, 0.0, np.where(u < dist.p_zero + dist.p_one, 1.0, v))


def partial_sample(i0, i1, mask) -> np.ndarray:
    """``mask * i0 + (1 - mask) * i1`` with the mask broadcast over channels."""
    a, b = _pair(i0, i1)
    m = np.asarray(mask, dtype=np.float64)
    if m.shape != a.shape[:2]:
        raise ImageError(f"mask shape {m.shape} does not match image {a.shape[:2]}")
    if a.ndim == 3:
        m = m[:, :, None]
    return m * a + (1 - m) * b


def _partial_images(a, b, rng, count, cfg: ExpansionConfig) -> np.ndarray:
    h, w = a.shape[:2]
    th, tw = cfg.tiny_mask_shape(h, w)
    tiny = _draw_masks(rng, count, th, tw, cfg.mask)
    return np.stack([partial_sample(a, b, bilinear_resize(m, h, w)) for m in tiny])


def build_training_set(i0, i1, cfg: ExpansionConfig) -> list[np.ndarray]:
    """Materialize ``cfg.n`` expanded images."""
    cfg.validate()
    a, b = _pair(i0, i1)
    if cfg.strategy == "straight_line":
        return [straight_line_sample(a, b, k, cfg.n) for k in range(cfg.n)]
    rng = np.random.default_rng(cfg.seed)
    return list(_partial_images(a, b, rng, cfg.n, cfg))


class TrainingSetSampler:
    """Lazy batches from the expanded set, regenerated every epoch.

    Epoch ``e`` conceptually holds ``cfg.n`` images; batches walk through it
    in order, so with ``steps * batch == n`` every image of an epoch is seen
    exactly once. Images are produced on demand from a seed derived from
    ``(cfg.seed, epoch, step)``.
    """

    def __init__(self, i0, i1, cfg: ExpansionConfig):
        cfg.validate()
        self.i0, self.i1 = _pair(i0, i1)
        self.cfg = cfg

    def batch(self, epoch: int, step: int, size: int) -> np.ndarray:
        rng = np.random.default_rng([self.cfg.seed, epoch, step])
        if self.cfg.strategy == "partial":
            return _partial_images(self.i0, self.i1, rng, size, self.cfg)
        order = np.random.default_rng([self.cfg.seed, epoch]).permutation(self.cfg.n)
        start = step * size
        ks = order[np.arange(start, start + size) % self.cfg.n]
        t = (ks / (self.cfg.n + 1))[:, None, None, None]
        return t * self.i0 + (1 - t) * self.i1
