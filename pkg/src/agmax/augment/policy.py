"""Fixed-policy augmentation (AutoAugment-style application, no search).

A policy is a list of sub-policies; each sub-policy is a list of
``(op, probability, magnitude)`` triples with magnitude in [0, 10]. One
sub-policy is picked uniformly per image and its ops are applied in order,
each with its own probability.

Magnitude m maps to op parameters as follows (geometric ops pick a random
sign with probability 1/2)::

    rotate        angle = 30 * m/10 degrees
    translateX/Y  shift = round(0.45 * m/10 * width|height) pixels
    shearX/Y      shear = 0.3 * m/10
    solarize      threshold = 1 - m/10   (pixels >= threshold are inverted)
    posterize     bits kept = 8 - round(4 * m/10)
    contrast      factor = 0.1 + 1.8 * m/10   (m=5 is identity)
    brightness    factor = 0.1 + 1.8 * m/10
    invert, equalize, autocontrast   magnitude ignored

Geometric ops resample nearest-neighbour about the image centre and fill
exposed pixels with zeros. Colour ops work on [0, 1] intensities.

File format (JSON)::

    {"name": "demo", "sub_policies": [[["rotate", 0.7, 2], ["invert", 0.2, 0]], ...]}
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import PolicyError
from .ops import adjust_brightness, adjust_contrast

MAX_MAGNITUDE = 10.0


def _affine_nearest(img: np.ndarray, inv: np.ndarray, offset=(0.0, 0.0)) -> np.ndarray:
    """Sample ``img`` at ``inv @ (p - c) + c + offset`` for each output pixel p."""
    h, w = img.shape[:2]
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    yy, xx = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    dy, dx = yy - cy, xx - cx
    sy = inv[0, 0] * dy + inv[0, 1] * dx + cy + offset[0]
    sx = inv[1, 0] * dy + inv[1, 1] * dx + cx + offset[1]
    iy = np.rint(sy).astype(np.int64)
    ix = np.rint(sx).astype(np.int64)
    valid = (iy >= 0) & (iy < h) & (ix >= 0) & (ix < w)
    out = np.zeros_like(img)
    out[valid] = img[iy[valid], ix[valid]]
    return out


def rotate(img, degrees: float):
    if degrees == 0:
        return img.copy()
    t = np.deg2rad(degrees)
    c, s = np.cos(t), np.sin(t)
    return _affine_nearest(img, np.array([[c, -s], [s, c]]))


def translate_x(img, pixels: int):
    return _affine_nearest(img, np.eye(2), (0.0, -float(pixels)))


def translate_y(img, pixels: int):
    return _affine_nearest(img, np.eye(2), (-float(pixels), 0.0))


def shear_x(img, factor: float):
    return _affine_nearest(img, np.array([[1.0, 0.0], [-factor, 1.0]]))


def shear_y(img, factor: float):
    return _affine_nearest(img, np.array([[1.0, -factor], [0.0, 1.0]]))


def invert(img):
    return 1.0 - img


def solarize(img, threshold: float):
    return np.where(img >= threshold, 1.0 - img, img)


def _to_levels(img):
    return np.clip(np.rint(img * 255.0), 0, 255).astype(np.int64)


def posterize(img, bits: int):
    if bits >= 8:
        return img.copy()
    mask = ~((1 << (8 - bits)) - 1) & 0xFF
    return (_to_levels(img) & mask).astype(img.dtype) / 255.0


def equalize(img):
    """Per-channel histogram equalization over 256 levels."""
    q = _to_levels(img)
    out = np.empty(img.shape, dtype=img.dtype)
    for ch in range(img.shape[2]):
        band = q[..., ch]
        hist = np.bincount(band.ravel(), minlength=256)
        nz = hist[hist > 0]
        step = (nz.sum() - nz[-1]) // 255 if nz.size else 0
        if step == 0:
            out[..., ch] = img[..., ch]
            continue
        lut = np.empty(256, dtype=np.int64)
        n = step // 2
        for i in range(256):
            lut[i] = min(n // step, 255)
            n += hist[i]
        out[..., ch] = lut[band] / 255.0
    return out


def autocontrast(img):
    out = img.copy()
    for ch in range(img.shape[2]):
        lo, hi = img[..., ch].min(), img[..., ch].max()
        if hi > lo:
            out[..., ch] = (img[..., ch] - lo) / (hi - lo)
    return out


def _enhance_factor(m):
    return 0.1 + 1.8 * m / MAX_MAGNITUDE


def _apply(op: str, img: np.ndarray, m: float, sign: float) -> np.ndarray:
    h, w = img.shape[:2]
    f = m / MAX_MAGNITUDE
    if op == "rotate":
        return rotate(img, sign * 30.0 * f)
    if op == "translateX":
        return translate_x(img, int(sign * round(0.45 * f * w)))
    if op == "translateY":
        return translate_y(img, int(sign * round(0.45 * f * h)))
    if op == "shearX":
        return shear_x(img, sign * 0.3 * f)
    if op == "shearY":
        return shear_y(img, sign * 0.3 * f)
    if op == "invert":
        return invert(img)
    if op == "solarize":
        return solarize(img, 1.0 - f)
    if op == "posterize":
        return posterize(img, 8 - int(round(4 * f)))
    if op == "contrast":
        return adjust_contrast(img, _enhance_factor(m))
    if op == "brightness":
        return adjust_brightness(img, _enhance_factor(m))
    if op == "equalize":
        return equalize(img)
    if op == "autocontrast":
        return autocontrast(img)
    raise PolicyError(f"unknown policy op {op!r}", "augment.policy")


OPS = (
    "rotate",
    "translateX",
    "translateY",
    "shearX",
    "shearY",
    "invert",
    "solarize",
    "posterize",
    "contrast",
    "brightness",
    "equalize",
    "autocontrast",
)


@dataclass(frozen=True)
class Policy:
    sub_policies: tuple
    name: str = "custom"

    def __post_init__(self):
        if not self.sub_policies:
            raise PolicyError("policy needs at least one sub-policy", "augment.policy")
        for i, sub in enumerate(self.sub_policies):
            if not sub:
                raise PolicyError(f"sub-policy {i} is empty", "augment.policy")
            for j, step in enumerate(sub):
                if len(step) != 3:
                    raise PolicyError(f"sub-policy {i} step {j}: expected (op, probability, magnitude)", "augment.policy")
                op, p, m = step
                where = f"sub-policy {i} step {j}"
                if op not in OPS:
                    raise PolicyError(f"{where}: unknown op {op!r}", "augment.policy")
                if not 0.0 <= float(p) <= 1.0:
                    raise PolicyError(f"{where}: probability {p} outside [0, 1]", "augment.policy")
                if not 0.0 <= float(m) <= MAX_MAGNITUDE:
                    raise PolicyError(f"{where}: magnitude {m} outside [0, 10]", "augment.policy")

    @classmethod
    def from_obj(cls, obj, name=None) -> "Policy":
        if isinstance(obj, dict):
            name = name or obj.get("name", "custom")
            obj = obj.get("sub_policies")
        if not isinstance(obj, (list, tuple)):
            raise PolicyError("policy must be a list of sub-policies", "augment.policy")
        subs = []
        for i, sub in enumerate(obj):
            if not isinstance(sub, (list, tuple)):
                raise PolicyError(f"sub-policy {i} must be a list of steps", "augment.policy")
            steps = []
            for j, s in enumerate(sub):
                if not isinstance(s, (list, tuple)) or len(s) != 3:
                    raise PolicyError(f"sub-policy {i} step {j}: expected (op, probability, magnitude)", "augment.policy")
                try:
                    steps.append((str(s[0]), float(s[1]), float(s[2])))
                except (TypeError, ValueError):
                    raise PolicyError(f"sub-policy {i} step {j}: probability and magnitude must be numbers", "augment.policy") from None
            subs.append(tuple(steps))
        return cls(tuple(subs), name or "custom")

    def to_obj(self) -> dict:
        return {"name": self.name, "sub_policies": [[list(step) for step in sub] for sub in self.sub_policies]}


# A small hand-written demo policy over the supported ops. It is not a
# searched policy and makes no claim to match any published one.
DEMO_POLICY = Policy(
    (
        (("rotate", 0.6, 3), ("equalize", 0.4, 0)),
        (("translateX", 0.5, 4), ("contrast", 0.5, 7)),
        (("shearY", 0.5, 5), ("autocontrast", 0.6, 0)),
        (("brightness", 0.7, 6), ("translateY", 0.4, 3)),
        (("posterize", 0.5, 5), ("shearX", 0.4, 4)),
        (("solarize", 0.3, 4), ("rotate", 0.5, 2)),
        (("invert", 0.1, 0), ("contrast", 0.6, 3)),
        (("equalize", 0.5, 0), ("brightness", 0.5, 3)),
    ),
    name="demo",
)

BUILTIN = {"demo": DEMO_POLICY}


def load_policy(ref) -> Policy:
    """Load ``builtin:<name>`` or a JSON file path."""
    if isinstance(ref, Policy):
        return ref
    ref = str(ref)
    if ref.startswith("builtin:"):
        key = ref.split(":", 1)[1]
        if key not in BUILTIN:
            raise PolicyError(f"unknown builtin policy {key!r}", "augment.policy")
        return BUILTIN[key]
    path = Path(ref)
    try:
        obj = json.loads(path.read_text())
    except FileNotFoundError:
        raise PolicyError(f"policy file not found: {path}", "augment.policy") from None
    except json.JSONDecodeError as exc:
        raise PolicyError(f"policy file {path} is not valid JSON: {exc}", "augment.policy") from None
    return Policy.from_obj(obj, name=path.stem)


def policy_augment(img: np.ndarray, policy: Policy, rng) -> np.ndarray:
    idx = int(rng.integers(0, len(policy.sub_policies)))
    out = img
    for op, p, m in policy.sub_policies[idx]:
        u = rng.random()
        sign = 1.0 if rng.random() < 0.5 else -1.0
        if u < p:
            out = _apply(op, out, m, sign)
    return out if out is not img else img.copy()
