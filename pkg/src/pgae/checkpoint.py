"""Binary checkpoint format.

Layout (all integers little-endian)::

    b"PGAE"                     magic
    u32 version                 currently 1
    u32 n, n bytes              config echo, UTF-8 JSON with sorted keys
    u32 count                   named tensors, sorted by name:
        u16 n, n bytes          name
        u8 ndim, ndim x u32     dims
        prod(dims) x f64        values, C order
    u32 count                   vocabulary symbols in index order:
        u16 n, n bytes
    u32 n, n x f64              word-weight vector (may be empty)

Values are always written as 64-bit floats, so float32 models round-trip
exactly as well.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"PGAE"
VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    config: dict
    tensors: dict[str, np.ndarray]
    vocab: list[str] = field(default_factory=list)
    word_weights: np.ndarray = field(default_factory=lambda: np.zeros(0))


def _str(buf: io.BytesIO, s: str, width: str = "<H") -> None:
    b = s.encode("utf-8")
    buf.write(struct.pack(width, len(b)))
    buf.write(b)


def to_bytes(ckpt: Checkpoint) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", VERSION))
    _str(buf, json.dumps(ckpt.config, sort_keys=True), "<I")
    buf.write(struct.pack("<I", len(ckpt.tensors)))
    for name in sorted(ckpt.tensors):
        arr = np.asarray(ckpt.tensors[name])
        _str(buf, name)
        buf.write(struct.pack("<B", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        buf.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    buf.write(struct.pack("<I", len(ckpt.vocab)))
    for s in ckpt.vocab:
        _str(buf, s)
    w = np.asarray(ckpt.word_weights, dtype="<f8")
    buf.write(struct.pack("<I", w.size))
    buf.write(w.tobytes())
    return buf.getvalue()


class _Reader:
    def __init__(self, data: bytes, path):
        self.data, self.pos, self.path = data, 0, path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError(f"{self.path}: truncated checkpoint")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def string(self, width: str = "<H") -> str:
        (n,) = self.unpack(width)
        return self.take(n).decode("utf-8")


def from_bytes(data: bytes, path="<bytes>") -> Checkpoint:
    r = _Reader(data, path)
    if r.take(4) != MAGIC:
        raise CheckpointError(f"{path}: not a PGAE checkpoint")
    (version,) = r.unpack("<I")
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    config = json.loads(r.string("<I"))
    tensors = {}
    (count,) = r.unpack("<I")
    for _ in range(count):
        name = r.string()
        (ndim,) = r.unpack("<B")
        dims = r.unpack(f"<{ndim}I") if ndim else ()
        n = int(np.prod(dims)) if ndim else 1
        tensors[name] = np.frombuffer(r.take(8 * n), dtype="<f8").reshape(dims).astype(np.float64)
    (count,) = r.unpack("<I")
    vocab = [r.string() for _ in range(count)]
    (n,) = r.unpack("<I")
    w = np.frombuffer(r.take(8 * n), dtype="<f8").astype(np.float64)
    return Checkpoint(config, tensors, vocab, w)


def save(path, ckpt: Checkpoint) -> None:
    Path(path).write_bytes(to_bytes(ckpt))


def load(path) -> Checkpoint:
    return from_bytes(Path(path).read_bytes(), path)
