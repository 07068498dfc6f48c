"""Versioned binary container of named float64 tensors plus a JSON header.

Layout (all integers little-endian)::

    magic      8 bytes   b"HGANCKPT"
    version    uint32    currently 1
    hlen       uint64    byte length of the header
    header     hlen      UTF-8 JSON; header["tensors"] = [{"name", "shape"}, ...]
    payload              each tensor's values, binary64 LE, row-major, in header order
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"HGANCKPT"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, tensors: dict[str, np.ndarray], header: dict | None = None) -> None:
    header = dict(header or {})
    header["tensors"] = [{"name": k, "shape": list(np.shape(v))} for k, v in tensors.items()]
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", FORMAT_VERSION, len(hbytes)))
        fh.write(hbytes)
        for v in tensors.values():
            fh.write(np.ascontiguousarray(v, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    version, hlen = struct.unpack_from("<IQ", raw, 8)
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    start = 8 + struct.calcsize("<IQ")
    header = json.loads(raw[start:start + hlen].decode("utf-8"))
    offset = start + hlen
    tensors = {}
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        n = int(np.prod(shape, dtype=np.int64))
        end = offset + 8 * n
        if end > len(raw):
            raise CheckpointError(f"{path}: truncated payload at tensor {entry['name']!r}")
        tensors[entry["name"]] = np.frombuffer(raw[offset:end], dtype="<f8").reshape(shape).copy()
        offset = end
    if offset != len(raw):
        raise CheckpointError(f"{path}: {len(raw) - offset} trailing bytes")
    return tensors, header
