"""MLP and small CNN classifiers over diffcore, plus checkpoint I/O.

Images enter as n×H×W×Ch intensity batches. ``Model`` owns the input
normalization (per-channel mean/std) so that gradients with respect to raw
intensities are available to the attack code.

Parameter counts (widths w_1..w_k, flattened input size d, C classes):

* mlp: sum over consecutive layer pairs (a, b) of a*b + b, for the chain
  d -> w_1 -> ... -> w_k -> C.
* cnn: for each conv stage with c_in -> c_out channels and k×k kernels,
  c_out*c_in*k*k + c_out; then a dense head f*C + C, where f is
  c_last * (H // 2**stages) * (W // 2**stages).

Initialization: fan_in_gaussian draws hidden layers from N(0, gain²/fan_in)
and the output layer from N(0, head_gain²/fan_in). The small head gain keeps
the initial logits near zero so that early SGD steps do not saturate the
softmax; plain_gaussian uses one sigma everywhere.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import diffcore as dc
from .diffcore import Node, ParameterStore
from .errors import CheckpointError, ConfigError

INIT_SCHEMES = ("fan_in_gaussian", "plain_gaussian")


@dataclass(frozen=True)
class EncoderConfig:
    kind: str = "cnn"
    input_shape: tuple = (16, 16, 3)
    num_classes: int = 4
    widths: tuple = (8, 16)
    kernel: int = 3
    init: str = "fan_in_gaussian"
    gain: float = math.sqrt(2.0)
    head_gain: float = 0.25  # output layer; see the module docstring
    sigma: float = 0.05
    dtype: str = "float64"

    def __post_init__(self):
        if self.kind not in ("mlp", "cnn"):
            raise ConfigError(f"unknown model kind {self.kind!r}", "model.kind")
        if len(self.input_shape) != 3 or any(int(d) < 1 for d in self.input_shape):
            raise ConfigError(f"input shape must be (H, W, Ch) with positive dims, got {self.input_shape}", "model.input_shape")
        if self.num_classes < 2:
            raise ConfigError("need at least 2 classes", "model.num_classes")
        if any(int(w) < 1 for w in self.widths):
            raise ConfigError("all widths must be >= 1", "model.widths")
        if not self.gain > 0 or not self.head_gain >= 0:
            raise ConfigError("init gains must be positive (head gain may be 0)", "model.init_gain")
        if self.init not in INIT_SCHEMES:
            raise ConfigError(f"unknown init {self.init!r}", "model.init")
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ConfigError("kernel must be a positive odd integer", "model.kernel")
        if self.dtype not in ("float64", "float32"):
            raise ConfigError("precision must be float64 or float32", "train.precision")
        if self.kind == "cnn":
            h, w, _ = self.input_shape
            s = 2 ** len(self.widths)
            if h // s < 1 or w // s < 1:
                raise ConfigError(f"{len(self.widths)} pooling stages do not fit a {h}x{w} input", "model.widths")


def _init(rng, shape, fan_in, cfg: EncoderConfig, head: bool = False):
    if cfg.init == "plain_gaussian":
        std = cfg.sigma
    else:
        std = (cfg.head_gain if head else cfg.gain) / math.sqrt(fan_in)
    return rng.normal(0.0, std, size=shape)


def param_count(cfg: EncoderConfig) -> int:
    h, w, ch = cfg.input_shape
    c = cfg.num_classes
    if cfg.kind == "mlp":
        dims = [h * w * ch, *cfg.widths, c]
        return sum(a * b + b for a, b in zip(dims[:-1], dims[1:]))
    total = 0
    cin = ch
    k = cfg.kernel
    for cout in cfg.widths:
        total += cout * cin * k * k + cout
        cin = cout
    s = 2 ** len(cfg.widths)
    flat = cin * (h // s) * (w // s)
    return total + flat * c + c


def build(cfg: EncoderConfig, rng) -> tuple[ParameterStore, Callable[[Node], Node]]:
    """Create parameters and the forward map ``x (n,H,W,Ch) -> logits (n,C)``."""
    store = ParameterStore()
    dtype = np.dtype(cfg.dtype)
    h, w, ch = cfg.input_shape
    c = cfg.num_classes

    if cfg.kind == "mlp":
        dims = [h * w * ch, *cfg.widths, c]
        for i, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
            store.add(f"fc{i}.weight", _init(rng, (a, b), a, cfg, head=i == len(dims) - 2), dtype)
            store.add(f"fc{i}.bias", np.zeros(b), dtype)
        layers = len(dims) - 1

        def forward(x: Node) -> Node:
            out = dc.reshape(x, (x.shape[0], -1))
            for i in range(layers):
                out = dc.bias_add(dc.matmul(out, store[f"fc{i}.weight"]), store[f"fc{i}.bias"])
                if i < layers - 1:
                    out = dc.relu(out)
            return out

        return store, forward

    k = cfg.kernel
    cin = ch
    for i, cout in enumerate(cfg.widths):
        store.add(f"conv{i}.weight", _init(rng, (cout, cin, k, k), cin * k * k, cfg), dtype)
        store.add(f"conv{i}.bias", np.zeros(cout), dtype)
        cin = cout
    s = 2 ** len(cfg.widths)
    flat = cin * (h // s) * (w // s)
    store.add("head.weight", _init(rng, (flat, c), flat, cfg, head=True), dtype)
    store.add("head.bias", np.zeros(c), dtype)
    stages = len(cfg.widths)

    def forward(x: Node) -> Node:
        out = dc.transpose(x, (0, 3, 1, 2))
        for i in range(stages):
            out = dc.conv2d(out, store[f"conv{i}.weight"], store[f"conv{i}.bias"], padding=k // 2)
            out = dc.max_pool2d(dc.relu(out), 2)
        out = dc.reshape(out, (out.shape[0], -1))
        return dc.bias_add(dc.matmul(out, store["head.weight"]), store["head.bias"])

    return store, forward


def predict(logits) -> np.ndarray:
    """Row-wise argmax; numpy's argmax already returns the first maximum."""
    v = logits.value if isinstance(logits, Node) else np.asarray(logits)
    return np.argmax(v, axis=1)


def topk_hits(logits, labels, k: int) -> np.ndarray:
    """Boolean per row: label among the k highest logits, ties to lower index."""
    v = logits.value if isinstance(logits, Node) else np.asarray(logits)
    if k > v.shape[1]:
        raise ValueError(f"top-{k} is undefined for {v.shape[1]} classes")
    order = np.argsort(-v, axis=1, kind="stable")[:, :k]
    return np.any(order == np.asarray(labels)[:, None], axis=1)


@dataclass
class Model:
    """Encoder plus the input normalization applied in front of it."""

    config: EncoderConfig
    store: ParameterStore
    forward: Callable[[Node], Node]
    mean: np.ndarray = field(default_factory=lambda: np.zeros(0))
    std: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        ch = self.config.input_shape[2]
        dtype = np.dtype(self.config.dtype)
        self.mean = np.zeros(ch, dtype) if self.mean.size == 0 else np.asarray(self.mean, dtype)
        self.std = np.ones(ch, dtype) if self.std.size == 0 else np.asarray(self.std, dtype)
        if self.mean.shape != (ch,) or self.std.shape != (ch,) or np.any(self.std <= 0):
            raise ConfigError("normalization mean/std must have one positive entry per channel", "augment.normalize")

    @property
    def num_classes(self) -> int:
        return self.config.num_classes

    def normalize(self, images: np.ndarray) -> np.ndarray:
        return ((np.asarray(images, dtype=self.mean.dtype) - self.mean) / self.std).astype(self.mean.dtype)

    def logits(self, images) -> Node:
        """Forward raw-intensity images; a Node input keeps the graph to it."""
        if isinstance(images, Node):
            shape = images.shape
            mean = Node(np.broadcast_to(self.mean, shape).copy())
            std = Node(np.broadcast_to(self.std, shape).copy())
            return self.forward((images - mean) / std)
        return self.forward(Node(self.normalize(images)))

    def logits_normalized(self, images: np.ndarray) -> Node:
        return self.forward(Node(np.asarray(images, dtype=self.mean.dtype)))


def create_model(cfg: EncoderConfig, rng, mean=None, std=None) -> Model:
    store, forward = build(cfg, rng)
    return Model(
        cfg,
        store,
        forward,
        np.zeros(0) if mean is None else np.asarray(mean),
        np.zeros(0) if std is None else np.asarray(std),
    )


# Checkpoint layout (all integers little-endian u32):
#   b"AGMX", version, value width in bytes (8 or 4), entry count,
#   then per entry: name length, utf-8 name, rank, dims..., raw LE values.
MAGIC = b"AGMX"
VERSION = 1
NORM_MEAN = "input.mean"
NORM_STD = "input.std"


def _entries(model: Model):
    yield from ((k, p.value) for k, p in model.store)
    yield NORM_MEAN, model.mean
    yield NORM_STD, model.std


def save_checkpoint(model: Model, path) -> None:
    dtype = np.dtype(model.config.dtype).newbyteorder("<")
    entries = list(_entries(model))
    buf = bytearray(MAGIC)
    buf += struct.pack("<III", VERSION, dtype.itemsize, len(entries))
    for name, value in entries:
        raw = name.encode("utf-8")
        buf += struct.pack("<I", len(raw)) + raw
        buf += struct.pack("<I", value.ndim)
        buf += struct.pack(f"<{value.ndim}I", *value.shape)
        buf += np.ascontiguousarray(value, dtype=dtype).tobytes()
    path = Path(path)
    path.write_bytes(bytes(buf))


def read_checkpoint(path) -> tuple[int, dict[str, np.ndarray]]:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise CheckpointError(f"{path}: bad magic bytes {data[:4]!r}")
    try:
        version, width, count = struct.unpack_from("<III", data, 4)
        if version != VERSION:
            raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
        if width not in (4, 8):
            raise CheckpointError(f"{path}: unsupported value width {width}")
        dtype = np.dtype("<f8" if width == 8 else "<f4")
        pos = 16
        out = {}
        for _ in range(count):
            (nlen,) = struct.unpack_from("<I", data, pos)
            pos += 4
            name = data[pos : pos + nlen].decode("utf-8")
            pos += nlen
            (rank,) = struct.unpack_from("<I", data, pos)
            pos += 4
            dims = struct.unpack_from(f"<{rank}I", data, pos)
            pos += 4 * rank
            size = int(np.prod(dims)) if rank else 1
            nbytes = size * width
            if pos + nbytes > len(data):
                raise CheckpointError(f"{path}: truncated entry {name!r}")
            out[name] = np.frombuffer(data, dtype=dtype, count=size, offset=pos).reshape(dims).astype(dtype.newbyteorder("="))
            pos += nbytes
    except struct.error as exc:
        raise CheckpointError(f"{path}: truncated checkpoint ({exc})") from None
    if pos != len(data):
        raise CheckpointError(f"{path}: {len(data) - pos} trailing bytes")
    return width, out


def load_checkpoint(path, cfg: EncoderConfig) -> Model:
    """Rebuild a model for ``cfg`` and fill it from ``path``.

    Names and shapes must match the architecture ``cfg`` describes.
    """
    width, entries = read_checkpoint(path)
    if width != np.dtype(cfg.dtype).itemsize:
        raise CheckpointError(f"{path}: stored precision ({width} bytes) differs from config ({cfg.dtype})")
    try:
        mean = entries.pop(NORM_MEAN)
        std = entries.pop(NORM_STD)
    except KeyError:
        raise CheckpointError(f"{path}: missing input normalization entries") from None
    model = create_model(cfg, np.random.default_rng(0), mean, std)
    expected = {k: p.shape for k, p in model.store}
    got = {k: v.shape for k, v in entries.items()}
    if expected != got:
        raise CheckpointError(f"{path}: parameters do not match config: expected {expected}, found {got}")
    model.store.load_state(entries)
    return model
