"""JCKP1 checkpoint format.

Layout (all integers little-endian):
  magic b"JCKP1", version u32, tensor count u32, then per tensor:
  name length u16 + UTF-8 name, rank u8, dims u32 each,
  float32 little-endian data (row-major).

Values live as float64 in memory and are narrowed to float32 on disk;
loading widens losslessly back to float64.
"""

from __future__ import annotations

import struct

import numpy as np

from .tensor import Tensor

MAGIC = b"JCKP1"
VERSION = 1


class BadCheckpoint(ValueError):
    pass


def save_checkpoint(params: dict, path: str) -> None:
    """Write name -> Tensor mappings; names are sorted for byte determinism."""
    names = sorted(params)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(names)))
        for name in names:
            data = params[name].data
            encoded = name.encode("utf-8")
            f.write(struct.pack("<H", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<B", data.ndim))
            for dim in data.shape:
                f.write(struct.pack("<I", dim))
            f.write(np.ascontiguousarray(data, dtype="<f4").tobytes())


def load_checkpoint(path: str) -> dict:
    """Read a JCKP1 file into name -> Tensor (float64, requires_grad=True)."""
    with open(path, "rb") as f:
        blob = f.read()
    if blob[: len(MAGIC)] != MAGIC:
        raise BadCheckpoint(f"{path}: bad magic {blob[:5]!r}")
    off = len(MAGIC)
    version, count = struct.unpack_from("<II", blob, off)
    off += 8
    if version != VERSION:
        raise BadCheckpoint(f"{path}: unsupported version {version}")
    params = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", blob, off)
        off += 2
        name = blob[off : off + name_len].decode("utf-8")
        off += name_len
        (rank,) = struct.unpack_from("<B", blob, off)
        off += 1
        dims = struct.unpack_from(f"<{rank}I", blob, off) if rank else ()
        off += 4 * rank
        size = int(np.prod(dims)) if rank else 1
        data = np.frombuffer(blob, dtype="<f4", count=size, offset=off).reshape(dims)
        off += 4 * size
        params[name] = Tensor(data.astype(np.float64), requires_grad=True, name=name)
    if off != len(blob):
        raise BadCheckpoint(f"{path}: {len(blob) - off} trailing bytes")
    return params
