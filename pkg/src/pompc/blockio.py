"""Named-block binary serialization.

One self-describing container format backs both trainer checkpoints and
replay-buffer persistence. Layout (all integers little-endian):

    magic              8 bytes, caller-chosen
    version            uint32
    n_blocks           uint64
    blocks             n_blocks entries, each:
        kind           uint8   (0 = float64 tensor, 1 = utf-8/bytes,
                                2 = int64 tensor)
        name_len       uint16
        name           utf-8
        payload:
            tensor     uint8 ndim, ndim x uint64 dims, raw values LE
            bytes      uint64 length, raw bytes

Tensors round-trip bit-exactly; byte blocks carry config text, RNG
state, and other structured odds and ends.
"""

from __future__ import annotations

import struct

import numpy as np

KIND_F64 = 0
KIND_BYTES = 1
KIND_I64 = 2

_DTYPES = {KIND_F64: "<f8", KIND_I64: "<i8"}


def write_blocks(path, magic, version, blocks):
    """Write an ordered list of (name, payload) blocks.

    Payloads may be float64/int64 ndarrays or bytes/str.
    """
    if len(magic) != 8:
        raise ValueError("magic must be exactly 8 bytes")
    with open(path, "wb") as f:
        f.write(magic)
        f.write(struct.pack("<I", version))
        f.write(struct.pack("<Q", len(blocks)))
        for name, payload in blocks:
            name_b = name.encode("utf-8")
            if isinstance(payload, str):
                payload = payload.encode("utf-8")
            if isinstance(payload, (bytes, bytearray)):
                f.write(struct.pack("<B", KIND_BYTES))
                f.write(struct.pack("<H", len(name_b)))
                f.write(name_b)
                f.write(struct.pack("<Q", len(payload)))
                f.write(bytes(payload))
                continue
            arr = np.asarray(payload)
            if arr.dtype == np.float64:
                kind = KIND_F64
            elif arr.dtype == np.int64:
                kind = KIND_I64
            else:
                raise TypeError(f"block {name!r}: unsupported dtype {arr.dtype}")
            f.write(struct.pack("<B", kind))
            f.write(struct.pack("<H", len(name_b)))
            f.write(name_b)
            f.write(struct.pack("<B", arr.ndim))
            for dim in arr.shape:
                f.write(struct.pack("<Q", dim))
            f.write(np.ascontiguousarray(arr).astype(_DTYPES[kind]).tobytes())


def read_blocks(path, magic, version):
    """Read back an ordered dict of blocks written by write_blocks."""
    out = {}
    with open(path, "rb") as f:
        got = f.read(8)
        if got != magic:
            raise ValueError(f"bad magic {got!r} (expected {magic!r})")
        (ver,) = struct.unpack("<I", f.read(4))
        if ver != version:
            raise ValueError(f"unsupported format version {ver}")
        (n_blocks,) = struct.unpack("<Q", f.read(8))
        for _ in range(n_blocks):
            (kind,) = struct.unpack("<B", f.read(1))
            (name_len,) = struct.unpack("<H", f.read(2))
            name = f.read(name_len).decode("utf-8")
            if kind == KIND_BYTES:
                (length,) = struct.unpack("<Q", f.read(8))
                out[name] = f.read(length)
            elif kind in _DTYPES:
                (ndim,) = struct.unpack("<B", f.read(1))
                shape = struct.unpack(f"<{ndim}Q", f.read(8 * ndim)) if ndim else ()
                count = int(np.prod(shape)) if ndim else 1
                data = np.frombuffer(f.read(8 * count), dtype=_DTYPES[kind])
                out[name] = data.reshape(shape).copy()
            else:
                raise ValueError(f"unknown block kind {kind}")
    return out
