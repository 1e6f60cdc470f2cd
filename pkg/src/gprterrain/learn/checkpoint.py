"""TNN1 model checkpoints.

Layout (little-endian)::

    4s      magic b"TNN1"
    u32     architecture id
    u32 x4  input rows, input cols, latent dim, band code
    f64 x4  gamma, KL weight, normalization mean, normalization std
    u32     tensor count T
    T x     shape entries: u32 ndim, then ndim x u32 dims
    f64...  every tensor's values in C order, concatenated in table order
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .layers import Parameter

MAGIC = b"TNN1"
_HEAD = struct.Struct("<4sIIIIIdddd")
_U32 = struct.Struct("<I")


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class CheckpointHeader:
    arch_id: int
    rows: int
    cols: int
    latent_dim: int = 0
    band: int = 0
    gamma: float = 0.0
    kl_weight: float = 0.0
    norm_mean: float = 0.0
    norm_std: float = 1.0


def encode_checkpoint(header: CheckpointHeader, params: Sequence[Parameter]) -> bytes:
    h = header
    parts = [
        _HEAD.pack(MAGIC, h.arch_id, h.rows, h.cols, h.latent_dim, h.band,
                   h.gamma, h.kl_weight, h.norm_mean, h.norm_std),
        _U32.pack(len(params)),
    ]
    for p in params:
        parts.append(_U32.pack(p.value.ndim))
        parts.append(struct.pack(f"<{p.value.ndim}I", *p.value.shape))
    for p in params:
        parts.append(np.ascontiguousarray(p.value, dtype="<f8").tobytes())
    return b"".join(parts)


def decode_checkpoint(buf: bytes, source: str = "<bytes>") -> tuple[CheckpointHeader, list[np.ndarray]]:
    if len(buf) < _HEAD.size + 4:
        raise CheckpointError(f"{source}: truncated checkpoint header")
    fields = _HEAD.unpack_from(buf)
    if fields[0] != MAGIC:
        raise CheckpointError(f"{source}: bad magic {fields[0]!r}, expected {MAGIC!r}")
    header = CheckpointHeader(*fields[1:])
    pos = _HEAD.size
    (count,) = _U32.unpack_from(buf, pos)
    pos += 4
    shapes = []
    try:
        for _ in range(count):
            (ndim,) = _U32.unpack_from(buf, pos)
            pos += 4
            shapes.append(struct.unpack_from(f"<{ndim}I", buf, pos))
            pos += 4 * ndim
    except struct.error:
        raise CheckpointError(f"{source}: truncated shape table") from None
    total = sum(int(np.prod(s)) for s in shapes)
    if len(buf) - pos != 8 * total:
        raise CheckpointError(f"{source}: expected {8 * total} parameter bytes, got {len(buf) - pos}")
    flat = np.frombuffer(buf, dtype="<f8", offset=pos).astype(np.float64)
    arrays, i = [], 0
    for s in shapes:
        n = int(np.prod(s))
        arrays.append(flat[i:i + n].reshape(s).copy())
        i += n
    return header, arrays


def save_checkpoint(path, header: CheckpointHeader, params: Sequence[Parameter]) -> int:
    buf = encode_checkpoint(header, params)
    Path(path).write_bytes(buf)
    return len(buf)


def load_checkpoint(path) -> tuple[CheckpointHeader, list[np.ndarray]]:
    return decode_checkpoint(Path(path).read_bytes(), str(path))


def assign_parameters(params: Sequence[Parameter], arrays: Sequence[np.ndarray], source: str = "checkpoint"):
    if len(params) != len(arrays):
        raise CheckpointError(f"{source}: has {len(arrays)} tensors, model expects {len(params)}")
    for p, a in zip(params, arrays):
        if p.value.shape != a.shape:
            raise CheckpointError(f"{source}: tensor shape {a.shape} does not match model {p.value.shape}")
        p.value[...] = a
