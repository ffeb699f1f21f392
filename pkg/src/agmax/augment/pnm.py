"""Binary PPM (P6, 3 channels) and PGM (P5, 1 channel) dumps."""

from __future__ import annotations

from pathlib import Path

import numpy as np


def to_bytes(img: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(np.asarray(img) * 255.0), 0, 255).astype(np.uint8)


def encode(img: np.ndarray) -> bytes:
    q = to_bytes(img)
    h, w, ch = q.shape
    if ch == 3:
        magic = b"P6"
    elif ch == 1:
        magic = b"P5"
    else:
        raise ValueError(f"PNM dumps need 1 or 3 channels, got {ch}")
    return magic + f"\n{w} {h}\n255\n".encode("ascii") + q.tobytes()


def write_pnm(img: np.ndarray, path) -> Path:
    path = Path(path)
    path.write_bytes(encode(img))
    return path


def read_pnm(path) -> np.ndarray:
    """Parse a P5/P6 file written by :func:`write_pnm` into [0, 1] floats."""
    data = Path(path).read_bytes()
    fields = []
    pos = 0
    while len(fields) < 4:
        while data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while not data[end : end + 1].isspace():
            end += 1
        fields.append(data[pos:end])
        pos = end
    pos += 1
    magic, w, h, maxval = fields[0], int(fields[1]), int(fields[2]), int(fields[3])
    if maxval != 255 or magic not in (b"P5", b"P6"):
        raise ValueError(f"unsupported PNM header in {path}")
    ch = 3 if magic == b"P6" else 1
    raw = np.frombuffer(data, dtype=np.uint8, count=w * h * ch, offset=pos)
    return raw.reshape(h, w, ch).astype(np.float64) / 255.0
