"""Per-image transforms on H×W×Ch float arrays.

Random wrappers draw their parameters from an explicit generator and then
call the deterministic ``*_at`` forms, which the tests drive directly.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError


def _check_image(img: np.ndarray, op: str) -> None:
    if img.ndim != 3:
        raise ShapeError(op, img.shape, ("H", "W", "Ch"))


def shift_crop(img: np.ndarray, pad: int, dy: int, dx: int, crop=None) -> np.ndarray:
    """Zero-pad by ``pad`` on every side and cut a window at offset (dy, dx)."""
    _check_image(img, "pad_crop")
    h, w, _ = img.shape
    ch, cw = (h, w) if crop is None else crop
    ph, pw = h + 2 * pad, w + 2 * pad
    if ch > ph or cw > pw:
        raise ShapeError("pad_crop", (ch, cw), (ph, pw), detail="crop larger than padded image")
    if not (0 <= dy <= ph - ch and 0 <= dx <= pw - cw):
        raise ValueError(f"pad_crop: offset ({dy}, {dx}) outside the padded image")
    if pad == 0 and (ch, cw) == (h, w):
        return img.copy()
    padded = np.zeros((ph, pw, img.shape[2]), dtype=img.dtype)
    padded[pad : pad + h, pad : pad + w] = img
    return padded[dy : dy + ch, dx : dx + cw].copy()


def pad_crop(img: np.ndarray, pad: int, rng, crop=None) -> np.ndarray:
    h, w, _ = img.shape
    ch, cw = (h, w) if crop is None else crop
    ph, pw = h + 2 * pad, w + 2 * pad
    if ch > ph or cw > pw:
        raise ShapeError("pad_crop", (ch, cw), (ph, pw), detail="crop larger than padded image")
    dy = int(rng.integers(0, ph - ch + 1))
    dx = int(rng.integers(0, pw - cw + 1))
    return shift_crop(img, pad, dy, dx, crop)


def hflip(img: np.ndarray, p: float, rng) -> np.ndarray:
    # always draw, so the stream position is independent of the outcome
    flip = rng.random() < p
    return img[:, ::-1].copy() if flip else img


def normalize(img: np.ndarray, mean, std) -> np.ndarray:
    return (img - np.asarray(mean, dtype=img.dtype)) / np.asarray(std, dtype=img.dtype)


def square_box(h: int, w: int, size: int, cy: int, cx: int) -> tuple[int, int, int, int]:
    """Clipped (y0, y1, x0, x1) of a ``size`` square centred on (cy, cx)."""
    y0 = cy - size // 2
    x0 = cx - size // 2
    return max(y0, 0), min(y0 + size, h), max(x0, 0), min(x0 + size, w)


def cutout_at(img: np.ndarray, size: int, cy: int, cx: int, fill) -> np.ndarray:
    _check_image(img, "cutout")
    if size < 0:
        raise ValueError("cutout: size must be >= 0")
    out = img.copy()
    if size == 0:
        return out
    y0, y1, x0, x1 = square_box(img.shape[0], img.shape[1], size, cy, cx)
    if y1 > y0 and x1 > x0:
        out[y0:y1, x0:x1] = np.asarray(fill, dtype=img.dtype)
    return out


def cutout(img: np.ndarray, size: int, fill, rng) -> np.ndarray:
    if size < 0:
        raise ValueError("cutout: size must be >= 0")
    cy = int(rng.integers(0, img.shape[0]))
    cx = int(rng.integers(0, img.shape[1]))
    return cutout_at(img, size, cy, cx, fill)


def adjust_brightness(img: np.ndarray, factor: float) -> np.ndarray:
    return np.clip(img * factor, 0.0, 1.0)


def adjust_contrast(img: np.ndarray, factor: float) -> np.ndarray:
    m = img.mean()
    return np.clip(m + factor * (img - m), 0.0, 1.0)


def color_jitter(img: np.ndarray, brightness: float, contrast: float, rng) -> np.ndarray:
    """Brightness then contrast, factors uniform in [1 - r, 1 + r]."""
    b = rng.uniform(1.0 - brightness, 1.0 + brightness)
    c = rng.uniform(1.0 - contrast, 1.0 + contrast)
    out = img
    if brightness > 0:
        out = adjust_brightness(out, b)
    if contrast > 0:
        out = adjust_contrast(out, c)
    return out
