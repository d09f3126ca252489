"""Binary checkpoint format.

Layout (little-endian): magic ``NFSPNET1``; u16 format version; u32 length and
UTF-8 text of the network description; u32 tensor count; then per tensor a u16
name length, the name, a u8 rank, u32 dims and float32 data.
"""

from __future__ import annotations

import io
import struct
from pathlib import Path

import numpy as np

from .network import NetworkSpec, ParamStore

MAGIC = b"NFSPNET1"
VERSION = 1


class CheckpointError(ValueError):
    pass


def dumps(params: ParamStore, spec: NetworkSpec) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<H", VERSION))
    desc = spec.describe().encode()
    buf.write(struct.pack("<I", len(desc)))
    buf.write(desc)
    buf.write(struct.pack("<I", len(params)))
    for name, arr in params.items():
        raw = name.encode()
        buf.write(struct.pack("<H", len(raw)))
        buf.write(raw)
        buf.write(struct.pack("<B", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        buf.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return buf.getvalue()


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError("checkpoint is truncated")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def loads(data: bytes) -> tuple[ParamStore, NetworkSpec]:
    r = _Reader(data)
    if r.take(len(MAGIC)) != MAGIC:
        raise CheckpointError("not a network checkpoint (bad magic)")
    (version,) = r.unpack("<H")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    (n,) = r.unpack("<I")
    try:
        spec = NetworkSpec.parse(r.take(n).decode())
    except (UnicodeDecodeError, ValueError) as exc:
        raise CheckpointError(f"bad network description: {exc}") from exc
    (count,) = r.unpack("<I")
    params = ParamStore()
    for _ in range(count):
        (n,) = r.unpack("<H")
        name = r.take(n).decode()
        (ndim,) = r.unpack("<B")
        shape = r.unpack(f"<{ndim}I")
        size = int(np.prod(shape)) if ndim else 1
        params[name] = np.frombuffer(r.take(4 * size), dtype="<f4").reshape(shape).astype(np.float32)
    if r.pos != len(data):
        raise CheckpointError("trailing bytes after checkpoint payload")
    return params, spec


def save(path, params: ParamStore, spec: NetworkSpec) -> None:
    Path(path).write_bytes(dumps(params, spec))


def load(path) -> tuple[ParamStore, NetworkSpec]:
    return loads(Path(path).read_bytes())
