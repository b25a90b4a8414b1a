"""Image containers and pixel utilities shared by the whole pipeline.

Images are plain ``numpy`` arrays of shape ``(H, W, C)`` holding floats in
``[0, 1]``. Single-channel maps (change intensity, masks) are ``(H, W)``
arrays. Nothing here mutates its inputs.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image


class ImageError(ValueError):
    """Invalid image data or incompatible image shapes."""


class ImageIOError(OSError):
    """Base class for image file failures."""


class ImageNotFound(ImageIOError, FileNotFoundError):
    pass


class UnsupportedImageFormat(ImageIOError):
    pass


@dataclass(frozen=True)
class ClipRegion:
    """Square window ``[top:top+size, left:left+size]``."""

    top: int
    left: int
    size: int

    def fits(self, height: int, width: int) -> bool:
        return (
            self.top >= 0
            and self.left >= 0
            and self.size > 0
            and self.top + self.size <= height
            and self.left + self.size <= width
        )


def as_image(data, *, check_range: bool = True) -> np.ndarray:
    """Validate and return ``data`` as a float64 image or map array."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim not in (2, 3) or arr.size == 0 or min(arr.shape) <= 0:
        raise ImageError(f"expected a non-empty (H, W) or (H, W, C) array, got shape {arr.shape}")
    if check_range and (not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0):
        raise ImageError("pixel values must lie in [0, 1]")
    return arr


def _check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ImageError(f"shape mismatch: {a.shape} vs {b.shape}")


def load_image(path) -> np.ndarray:
    """Read an 8-bit RGB or grayscale PNG as floats in ``[0, 1]``.

    Grayscale files come back as ``(H, W, 1)`` so the channel count survives.
    """
    path = Path(path)
    if not path.is_file():
        raise ImageNotFound(f"no such image: {path}")
    try:
        with Image.open(path) as im:
            im.load()
            fmt, mode = im.format, im.mode
            if fmt != "PNG":
                raise UnsupportedImageFormat(f"{path}: expected PNG, got {fmt}")
            if mode not in ("L", "RGB"):
                raise UnsupportedImageFormat(f"{path}: unsupported mode {mode!r}; need 8-bit L or RGB")
            raw = np.asarray(im, dtype=np.uint8)
    except ImageIOError:
        raise
    except OSError as exc:
        raise UnsupportedImageFormat(f"{path}: {exc}") from exc
    if raw.ndim == 2:
        raw = raw[:, :, None]
    return raw.astype(np.float64) / 255.0


def to_bytes(img) -> np.ndarray:
    """Quantize to uint8 with round-half-up (0.5 -> 128)."""
    arr = as_image(img)
    return np.floor(arr * 255.0 + 0.5).astype(np.uint8)


def save_image(img, path) -> None:
    """Write ``img`` as an 8-bit PNG, storing ``round(v * 255)``.

    Accepts ``(H, W)``, ``(H, W, 1)`` and ``(H, W, 3)`` arrays. Boolean maps
    are written as 0/255.
    """
    arr = np.asarray(img)
    if arr.dtype == bool:
        arr = arr.astype(np.float64)
    data = to_bytes(arr)
    if data.ndim == 3 and data.shape[2] == 1:
        data = data[:, :, 0]
    if data.ndim == 3 and data.shape[2] != 3:
        raise ImageError(f"cannot save {data.shape[2]}-channel image as PNG")
    path = Path(path)
    try:
        Image.fromarray(data, mode="L" if data.ndim == 2 else "RGB").save(path, format="PNG")
    except OSError as exc:
        raise ImageIOError(f"cannot write {path}: {exc}") from exc


def l2_distance(a, b) -> float:
    """Sum of squared differences over all pixels and channels."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_same_shape(a, b)
    diff = a - b
    return float(np.sum(diff * diff))


def bilinear_resize(img, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resampling on a corner-aligned grid.

    Output pixel ``(0, 0)`` samples input ``(0, 0)`` and the last output pixel
    samples the last input pixel, so corners are reproduced exactly.
    """
    if int(out_h) != out_h or int(out_w) != out_w or out_h < 1 or out_w < 1:
        raise ValueError(f"output size must be positive integers, got {out_h}x{out_w}")
    arr = as_image(img, check_range=False)
    in_h, in_w = arr.shape[:2]

    def grid(n_in, n_out):
        if n_out == 1 or n_in == 1:
            pos = np.zeros(n_out)
        else:
            pos = np.arange(n_out) * ((n_in - 1) / (n_out - 1))
        lo = np.minimum(np.floor(pos).astype(int), n_in - 1)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, pos - lo

    y0, y1, fy = grid(in_h, int(out_h))
    x0, x1, fx = grid(in_w, int(out_w))
    if arr.ndim == 3:
        fy = fy[:, None, None]
        fx = fx[None, :, None]
    else:
        fy = fy[:, None]
        fx = fx[None, :]
    top = arr[y0][:, x0] * (1 - fx) + arr[y0][:, x1] * fx
    bottom = arr[y1][:, x0] * (1 - fx) + arr[y1][:, x1] * fx
    out = top * (1 - fy) + bottom * fy
    # rounding can step a hair outside the input range
    return np.clip(out, arr.min(), arr.max())


def extract_clip(img, region: ClipRegion) -> np.ndarray:
    arr = np.asarray(img)
    if not region.fits(arr.shape[0], arr.shape[1]):
        raise ImageError(f"{region} does not fit in a {arr.shape[0]}x{arr.shape[1]} image")
    return arr[region.top : region.top + region.size, region.left : region.left + region.size]


def global_max_normalize(img) -> np.ndarray:
    """Divide by the single largest value over all pixels and channels."""
    arr = np.asarray(img, dtype=np.float64)
    peak = arr.max()
    if not peak > 0:
        raise ImageError("cannot normalize an image with no positive value")
    return arr / peak
