"""Versioned binary checkpoint of named float64 tensors.

Layout (little-endian)::

    b"ECGVCKPT" | u32 version | u32 meta_len | meta (utf-8 JSON, sorted keys)
    u32 count | count * (u16 name_len | name | u8 ndim | ndim * u32 dims | f8 data)

No timestamps are stored, so identical parameters give identical bytes.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .tensor import Tensor

MAGIC = b"ECGVCKPT"
VERSION = 1


class CheckpointError(ValueError):
    pass


def dumps(params: dict, meta: dict | None = None) -> bytes:
    meta_bytes = json.dumps(meta or {}, sort_keys=True).encode()
    parts = [MAGIC, struct.pack("<II", VERSION, len(meta_bytes)), meta_bytes, struct.pack("<I", len(params))]
    for name, t in params.items():
        arr = np.ascontiguousarray(t.data if isinstance(t, Tensor) else t, dtype="<f8")
        nb = name.encode()
        parts.append(struct.pack("<H", len(nb)) + nb + struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes())
    return b"".join(parts)


def loads(buf: bytes) -> tuple[dict[str, np.ndarray], dict]:
    try:
        return _parse(buf)
    except (struct.error, ValueError, UnicodeDecodeError) as exc:
        if isinstance(exc, CheckpointError):
            raise
        raise CheckpointError(f"truncated or malformed checkpoint: {exc}") from exc


def _parse(buf: bytes) -> tuple[dict[str, np.ndarray], dict]:
    if buf[:8] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    pos = 8
    version, meta_len = struct.unpack_from("<II", buf, pos)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    pos += 8
    meta = json.loads(buf[pos : pos + meta_len].decode())
    pos += meta_len
    (count,) = struct.unpack_from("<I", buf, pos)
    pos += 4
    out = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", buf, pos)
        pos += 2
        name = buf[pos : pos + nlen].decode()
        pos += nlen
        (ndim,) = struct.unpack_from("<B", buf, pos)
        pos += 1
        shape = struct.unpack_from(f"<{ndim}I", buf, pos)
        pos += 4 * ndim
        n = int(np.prod(shape)) if ndim else 1
        out[name] = np.frombuffer(buf, dtype="<f8", count=n, offset=pos).reshape(shape).astype(np.float64)
        pos += 8 * n
    if pos != len(buf):
        raise CheckpointError(f"{len(buf) - pos} trailing bytes in checkpoint")
    return out, meta


def save(path: Path, params: dict, meta: dict | None = None):
    Path(path).write_bytes(dumps(params, meta))


def load(path: Path, requires_grad: bool = True) -> tuple[dict[str, Tensor], dict]:
    arrays, meta = loads(Path(path).read_bytes())
    return {k: Tensor(v, requires_grad=requires_grad) for k, v in arrays.items()}, meta
