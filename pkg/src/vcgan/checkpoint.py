"""Binary checkpoint format.

Layout (all integers little-endian u32)::

    b"VCGN" | version | n_tensors
    per tensor: name_len | utf-8 name | rank | dims... | float32 payload
    json_len | utf-8 JSON (config, counters, RNG states, normalization stats)

Tensors are stored as float32, so a checkpoint that is loaded and written
again reproduces the same bytes.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .util import atomic_write_bytes

MAGIC = b"VCGN"
VERSION = 1


class CheckpointError(ValueError):
    pass


def pack(tensors: dict[str, np.ndarray], meta: dict) -> bytes:
    out = [MAGIC, struct.pack("<II", VERSION, len(tensors))]
    for name, arr in tensors.items():
        raw = name.encode("utf-8")
        a = np.ascontiguousarray(arr, dtype="<f4")
        out.append(struct.pack("<I", len(raw)) + raw)
        out.append(struct.pack(f"<I{a.ndim}I", a.ndim, *a.shape))
        out.append(a.tobytes())
    blob = json.dumps(meta, separators=(",", ":")).encode("utf-8")
    out.append(struct.pack("<I", len(blob)) + blob)
    return b"".join(out)


def unpack(data: bytes) -> tuple[dict[str, np.ndarray], dict]:
    if data[:4] != MAGIC:
        raise CheckpointError("not a checkpoint (bad magic bytes)")
    try:
        version, count = struct.unpack_from("<II", data, 4)
        if version != VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        pos = 12
        tensors = {}
        for _ in range(count):
            (n,) = struct.unpack_from("<I", data, pos)
            pos += 4
            name = data[pos:pos + n].decode("utf-8")
            pos += n
            (rank,) = struct.unpack_from("<I", data, pos)
            pos += 4
            dims = struct.unpack_from(f"<{rank}I", data, pos)
            pos += 4 * rank
            size = int(np.prod(dims)) * 4
            if pos + size > len(data):
                raise CheckpointError(f"truncated tensor {name!r}")
            tensors[name] = np.frombuffer(data, dtype="<f4", count=size // 4,
                                          offset=pos).reshape(dims).astype(np.float64)
            pos += size
        (n,) = struct.unpack_from("<I", data, pos)
        pos += 4
        meta = json.loads(data[pos:pos + n].decode("utf-8"))
        if pos + n != len(data):
            raise CheckpointError("trailing bytes after metadata")
    except (struct.error, UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"corrupt checkpoint: {e}") from None
    return tensors, meta


def write(path, tensors: dict[str, np.ndarray], meta: dict) -> bytes:
    data = pack(tensors, meta)
    atomic_write_bytes(path, data)
    return data


def read(path) -> tuple[dict[str, np.ndarray], dict]:
    return unpack(Path(path).read_bytes())
