"""Datasets: procedurally generated gratings and the CIFAR-10 binary format.

CIFAR-10 binary records are 1 label byte followed by 3 × 1024 pixel bytes,
channel-planar (all R, then G, then B, each row-major 32×32). There is no
header and no multi-byte field. The writer uses the same layout with
1 + H·W·Ch bytes per record, so synthetic sets can be exported for other
tools.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataFormatError
from .rng import make_rng

CIFAR_SHAPE = (32, 32, 3)
CIFAR_CLASSES = 10
CIFAR_TRAIN_FILES = tuple(f"data_batch_{i}.bin" for i in range(1, 6))
CIFAR_TEST_FILES = ("test_batch.bin",)


@dataclass
class Dataset:
    images: np.ndarray  # n, H, W, Ch in [0, 1]
    labels: np.ndarray  # n, int64
    num_classes: int
    split: str = "train"

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 4:
            raise ValueError(f"images must be n x H x W x Ch, got {self.images.shape}")
        if len(self.images) != len(self.labels):
            raise ValueError("images and labels differ in length")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError("labels must lie in [0, num_classes)")

    def __len__(self):
        return len(self.labels)

    @property
    def image_shape(self) -> tuple:
        return tuple(self.images.shape[1:])

    def subset(self, idx) -> "Dataset":
        return Dataset(self.images[idx], self.labels[idx], self.num_classes, self.split)


@dataclass(frozen=True)
class SynthSpec:
    classes: int = 4
    train_per_class: int = 500
    test_per_class: int = 125
    size: int = 16
    channels: int = 3
    cycles_lo: float = 1.5  # grating periods across the image, lowest level
    cycles_hi: float = 2.5
    angle_jitter: float = 0.6  # radians
    freq_jitter: float = 0.15  # relative
    phase_jitter: float = 1.0  # radians
    amplitude: float = 0.25
    noise: float = 0.35
    seed: int = 0

    def __post_init__(self):
        if self.classes < 2:
            raise ConfigError("need at least 2 classes", "data.classes")
        if self.size < 8:
            raise ConfigError("synthetic images must be at least 8x8", "data.size")
        if self.channels not in (1, 3):
            raise ConfigError("channels must be 1 or 3", "data.channels")
        if self.train_per_class < 1 or self.test_per_class < 1:
            raise ConfigError("items per class must be >= 1", "data.train_per_class")


def class_layout(classes: int, lo: float, hi: float) -> tuple[np.ndarray, np.ndarray]:
    """Orientation (0 or pi/2) and cycles per image for each class.

    Orientations are restricted to vertical/horizontal so that a horizontal
    flip never turns one class into another.
    """
    c = np.arange(classes)
    levels = (classes + 1) // 2
    orient = (c % 2) * (np.pi / 2)
    level = c // 2
    cycles = lo + (hi - lo) * (level / (levels - 1) if levels > 1 else np.zeros(classes))
    return orient, cycles


def _gratings(spec: SynthSpec, per_class: int, rng) -> tuple[np.ndarray, np.ndarray]:
    s, c, ch = spec.size, spec.classes, spec.channels
    n = per_class * c
    labels = np.repeat(np.arange(c), per_class)
    coords = np.arange(s, dtype=np.float64) - (s - 1) / 2.0
    yy, xx = np.meshgrid(coords, coords, indexing="ij")
    orient, cycles = class_layout(c, spec.cycles_lo, spec.cycles_hi)

    theta = orient[labels] + rng.uniform(-spec.angle_jitter, spec.angle_jitter, n)
    freq = 2 * np.pi * cycles[labels] / s * (1.0 + rng.uniform(-spec.freq_jitter, spec.freq_jitter, n))
    phase = rng.uniform(-spec.phase_jitter, spec.phase_jitter, n)
    amp = spec.amplitude * rng.uniform(0.7, 1.0, n)
    gains = rng.uniform(0.6, 1.0, (n, ch))

    proj = np.cos(theta)[:, None, None] * xx + np.sin(theta)[:, None, None] * yy
    wave = np.sin(freq[:, None, None] * proj + phase[:, None, None])
    img = 0.5 + (amp[:, None, None, None] * gains[:, None, None, :]) * wave[..., None]
    img = img + rng.normal(0.0, spec.noise, img.shape)
    order = rng.permutation(n)
    return np.clip(img, 0.0, 1.0)[order], labels[order]


def generate_synth(spec: SynthSpec = SynthSpec()) -> tuple[Dataset, Dataset]:
    """Oriented gratings; each class is an (orientation, frequency) pair.

    Train and test come from the same distribution using disjoint streams.
    """
    xtr, ytr = _gratings(spec, spec.train_per_class, make_rng(spec.seed, "synth", "train"))
    xte, yte = _gratings(spec, spec.test_per_class, make_rng(spec.seed, "synth", "test"))
    return Dataset(xtr, ytr, spec.classes, "train"), Dataset(xte, yte, spec.classes, "test")


def channel_stats(dataset: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel mean and std; call on the train split only."""
    x = dataset.images.reshape(-1, dataset.images.shape[-1])
    std = x.std(axis=0)
    return x.mean(axis=0), np.where(std > 0, std, 1.0)


def parse_cifar_bytes(data: bytes, shape=CIFAR_SHAPE, num_classes=CIFAR_CLASSES, path=None, split="train") -> Dataset:
    h, w, ch = shape
    record = 1 + h * w * ch
    whole = len(data) // record
    if len(data) % record:
        raise DataFormatError(
            f"file size {len(data)} is not a multiple of the {record}-byte record size", offset=whole * record, path=path
        )
    raw = np.frombuffer(data, dtype=np.uint8).reshape(whole, record)
    labels = raw[:, 0].astype(np.int64)
    bad = np.flatnonzero(labels >= num_classes)
    if bad.size:
        i = int(bad[0])
        raise DataFormatError(f"label {labels[i]} >= {num_classes} in record {i}", offset=i * record, path=path)
    pixels = raw[:, 1:].reshape(whole, ch, h, w).transpose(0, 2, 3, 1)
    return Dataset(pixels.astype(np.float64) / 255.0, labels, num_classes, split)


def load_cifar10(path, split="train") -> Dataset:
    """Parse one CIFAR-10 binary batch file."""
    path = Path(path)
    return parse_cifar_bytes(path.read_bytes(), path=path, split=split)


def cifar_dir(root=None) -> Path:
    root = Path(root or os.environ.get("AGMAX_DATA_DIR", "data"))
    nested = root / "cifar-10-batches-bin"
    return nested if nested.is_dir() else root


def load_cifar10_split(root=None, split="train") -> Dataset:
    base = cifar_dir(root)
    files = CIFAR_TRAIN_FILES if split == "train" else CIFAR_TEST_FILES
    parts = []
    for name in files:
        p = base / name
        if not p.exists():
            raise FileNotFoundError(f"CIFAR-10 batch not found: {p}")
        parts.append(load_cifar10(p, split))
    return Dataset(
        np.concatenate([d.images for d in parts]), np.concatenate([d.labels for d in parts]), CIFAR_CLASSES, split
    )


def encode_cifar(dataset: Dataset) -> bytes:
    """Serialize with the CIFAR record layout; pixels are rounded to bytes."""
    q = np.clip(np.rint(dataset.images * 255.0), 0, 255).astype(np.uint8)
    if dataset.num_classes > 256:
        raise ValueError("label byte cannot hold more than 256 classes")
    n = len(dataset)
    planar = q.transpose(0, 3, 1, 2).reshape(n, -1)
    return np.concatenate([dataset.labels.astype(np.uint8)[:, None], planar], axis=1).tobytes()


def write_cifar_binary(dataset: Dataset, path) -> Path:
    path = Path(path)
    path.write_bytes(encode_cifar(dataset))
    return path
