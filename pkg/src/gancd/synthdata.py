"""Synthetic scene pairs: black background, non-overlapping shapes.

Image A holds every common primitive in its base color. Image B redraws each
common primitive shifted by a few pixels and with its color offset by
``delta`` on every channel, which mimics two sensors looking from slightly
different angles. Changed primitives appear in exactly one of the two images
and make up the ground truth.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Literal

import numpy as np
from scipy.ndimage import binary_dilation, gaussian_filter

KINDS = ("rectangle", "round", "triangle")


class PlacementError(RuntimeError):
    """Could not place the requested primitives without overlap."""


@dataclass(frozen=True)
class PrimitiveSpec:
    """One shape.

    ``size`` is the width (rectangle, triangle base) or the diameter (round);
    ``height`` defaults to ``size``. ``center`` is ``(row, col)``.
    """

    kind: Literal["rectangle", "round", "triangle"]
    center: tuple[int, int]
    size: int
    color: tuple[float, float, float]
    height: int | None = None
    changed: bool = False
    image: Literal["A", "B", "both"] = "both"
    shift: tuple[int, int] = (0, 0)
    color_b: tuple[float, float, float] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown primitive kind {self.kind!r}")
        if any(s < 0 for s in self.shift):
            raise ValueError("shift components must be non-negative")

    @property
    def box_height(self) -> int:
        return self.size if self.height is None else self.height

    def shifted(self) -> "PrimitiveSpec":
        dy, dx = self.shift
        return PrimitiveSpec(
            self.kind,
            (self.center[0] + dy, self.center[1] + dx),
            self.size,
            self.color,
            self.height,
            self.changed,
            self.image,
            (0, 0),
            self.color_b,
        )


@dataclass
class SceneConfig:
    height: int = 128
    width: int = 128
    channels: int = 3
    common_count: tuple[int, int] = (4, 7)
    changed_count: int = 3
    size_range: tuple[int, int] = (12, 28)
    delta: float = 10 / 255
    max_shift: int = 5
    sigma: float = 0.0
    margin: int = 2
    max_attempts: int = 500
    seed: int = 0

    def validate(self) -> None:
        lo, hi = self.common_count
        if not 0 <= lo <= hi:
            raise ValueError("common_count must be a non-negative range")
        if self.changed_count < 0 or self.max_shift < 0 or self.sigma < 0 or self.margin < 0:
            raise ValueError("counts, shift, sigma and margin must be non-negative")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("delta must lie in [0, 1]")
        if not 1 <= self.size_range[0] <= self.size_range[1]:
            raise ValueError("size_range must be a positive range")
        if self.channels not in (1, 3):
            raise ValueError("channels must be 1 or 3")


def _bbox(p: PrimitiveSpec) -> tuple[int, int, int, int]:
    h, w = p.box_height, p.size
    top = p.center[0] - h // 2
    left = p.center[1] - w // 2
    return top, left, h, w


def footprint(p: PrimitiveSpec, h: int, w: int) -> np.ndarray:
    """Boolean raster of ``p`` on an ``h`` x ``w`` grid."""
    top, left, bh, bw = _bbox(p)
    if top < 0 or left < 0 or top + bh > h or left + bw > w:
        raise ValueError(f"{p.kind} at {p.center} with size {bw}x{bh} leaves the {h}x{w} frame")
    out = np.zeros((h, w), dtype=bool)
    if bh == 0 or bw == 0:
        return out
    rows = np.arange(top, top + bh)[:, None]
    cols = np.arange(left, left + bw)[None, :]
    if p.kind == "rectangle":
        out[top : top + bh, left : left + bw] = True
        return out
    if p.kind == "round":
        r = bw / 2.0
        cy = top + bh / 2.0 - 0.5
        cx = left + bw / 2.0 - 0.5
        inside = (rows - cy) ** 2 + (cols - cx) ** 2 <= r * r
    else:
        # apex at the top centre, base along the bottom row of the box
        frac = (rows - top + 0.5) / bh
        half = frac * bw / 2.0
        inside = np.abs(cols + 0.5 - (left + bw / 2.0)) <= half
        inside = np.broadcast_to(inside, (bh, bw))
    out[top : top + bh, left : left + bw] = inside
    return out


def _random_primitive(rng: np.random.Generator, cfg: SceneConfig, changed: bool) -> PrimitiveSpec:
    kind = KINDS[rng.integers(len(KINDS))]
    size = int(rng.integers(cfg.size_range[0], cfg.size_range[1] + 1))
    height = size if kind == "round" else int(rng.integers(cfg.size_range[0], cfg.size_range[1] + 1))
    pad = cfg.margin + cfg.max_shift
    row = int(rng.integers(height // 2 + cfg.margin, cfg.height - (height - height // 2) - pad + 1))
    col = int(rng.integers(size // 2 + cfg.margin, cfg.width - (size - size // 2) - pad + 1))
    # byte-aligned colours far enough from the rails that +-delta stays in range
    step = int(round(cfg.delta * 255))
    low = max(60, step)
    color = tuple(float(v) / 255 for v in rng.integers(low, 256 - step, size=3))
    if changed:
        return PrimitiveSpec(kind, (row, col), size, color, height, True, "A" if rng.random() < 0.5 else "B")
    shift = tuple(int(s) for s in rng.integers(0, cfg.max_shift + 1, size=2))
    signs = rng.choice([-1.0, 1.0], size=3)
    color_b = tuple(float(np.round((c + s * cfg.delta) * 255)) / 255 for c, s in zip(color, signs))
    return PrimitiveSpec(kind, (row, col), size, color, height, False, "both", shift, color_b)


def _occupancy(p: PrimitiveSpec, cfg: SceneConfig) -> np.ndarray:
    """Footprint in both images, grown by the margin."""
    occ = footprint(p, cfg.height, cfg.width)
    if p.image == "both":
        occ |= footprint(p.shifted(), cfg.height, cfg.width)
    if cfg.margin:
        occ = binary_dilation(occ, iterations=cfg.margin)
    return occ


def place_primitives(cfg: SceneConfig, rng: np.random.Generator) -> list[PrimitiveSpec]:
    n_common = int(rng.integers(cfg.common_count[0], cfg.common_count[1] + 1))
    wanted = [False] * n_common + [True] * cfg.changed_count
    placed: list[PrimitiveSpec] = []
    taken = np.zeros((cfg.height, cfg.width), dtype=bool)
    for changed in wanted:
        for _ in range(cfg.max_attempts):
            cand = _random_primitive(rng, cfg, changed)
            occ = _occupancy(cand, cfg)
            if not np.any(occ & taken):
                placed.append(cand)
                taken |= occ
                break
        else:
            raise PlacementError(
                f"no room for primitive {len(placed) + 1} of {len(wanted)} after {cfg.max_attempts} attempts"
            )
    return placed


def render(primitives, cfg: SceneConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Draw both images and the truth map for an already placed scene."""
    shape = (cfg.height, cfg.width, cfg.channels)
    img_a = np.zeros(shape)
    img_b = np.zeros(shape)
    truth = np.zeros((cfg.height, cfg.width), dtype=bool)
    for p in primitives:
        color_a = np.asarray(p.color[: cfg.channels])
        if p.image == "both":
            img_a[footprint(p, cfg.height, cfg.width)] = color_a
            color_b = np.asarray((p.color_b or p.color)[: cfg.channels])
            img_b[footprint(p.shifted(), cfg.height, cfg.width)] = color_b
        else:
            mask = footprint(p, cfg.height, cfg.width)
            (img_a if p.image == "A" else img_b)[mask] = color_a
            truth |= mask
    if cfg.sigma > 0:
        img_a = gaussian_filter(img_a, sigma=(cfg.sigma, cfg.sigma, 0))
        img_b = gaussian_filter(img_b, sigma=(cfg.sigma, cfg.sigma, 0))
    return np.clip(img_a, 0, 1), np.clip(img_b, 0, 1), truth


def generate_scene_pair(cfg: SceneConfig | None = None, *, return_primitives: bool = False):
    """Return ``(image_a, image_b, truth)`` for a freshly drawn scene.

    The same ``cfg.seed`` always yields the same scene. Pass
    ``return_primitives=True`` to also get the placed :class:`PrimitiveSpec`
    list, e.g. for a manifest.
    """
    cfg = cfg or SceneConfig()
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    primitives = place_primitives(cfg, rng)
    img_a, img_b, truth = render(primitives, cfg)
    if return_primitives:
        return img_a, img_b, truth, primitives
    return img_a, img_b, truth


def manifest(cfg: SceneConfig, primitives) -> str:
    return json.dumps(
        {"config": asdict(cfg), "primitives": [asdict(p) for p in primitives]},
        indent=2,
        sort_keys=True,
    )
