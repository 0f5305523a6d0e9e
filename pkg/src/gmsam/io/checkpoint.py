"""GMKD1 tensor container.

Layout (all integers little-endian)::

    magic      5 bytes  b"GMKD1"
    version    u16      1
    count      u32      number of tensor records
    record * count:
        name_len  u16, name  UTF-8 bytes
        dtype     u8   0 = float32, 1 = float64
        ndim      u8,  dims  u32 * ndim
        data      little-endian element bytes, C order
    crc32      u32      zlib CRC-32 of every preceding byte; present iff count >= 1

An empty container is exactly 11 bytes.  Any bytes after the declared end
are rejected.
"""
from __future__ import annotations

import struct
import zlib
from math import prod
from pathlib import Path

import numpy as np

from gmsam.errors import FormatError

MAGIC = b"GMKD1"
VERSION = 1
DTYPE_CODES = {np.dtype("<f4"): 0, np.dtype("<f8"): 1}
CODE_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}


def _as_array(value):
    arr = np.asarray(getattr(value, "data", value))
    if arr.dtype not in (np.float32, np.float64):
        raise TypeError(f"checkpoint tensors must be float32 or float64, got {arr.dtype}")
    return arr


def dumps(tensors):
    """Serialise an ordered name -> array mapping to container bytes."""
    items = list(tensors.items()) if hasattr(tensors, "items") else list(tensors)
    names = [name for name, _ in items]
    if len(set(names)) != len(names):
        raise ValueError("tensor names must be unique within a container")
    out = bytearray(MAGIC)
    out += struct.pack("<HI", VERSION, len(items))
    for name, value in items:
        arr = _as_array(value)
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise ValueError(f"tensor name too long: {name[:40]!r}...")
        if arr.ndim > 0xFF:
            raise ValueError(f"too many dimensions for {name!r}")
        le = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        out += struct.pack("<H", len(raw)) + raw
        out += struct.pack("<BB", DTYPE_CODES[le.dtype], arr.ndim)
        out += struct.pack(f"<{arr.ndim}I", *arr.shape)
        out += np.ascontiguousarray(le).tobytes()
    if items:
        out += struct.pack("<I", zlib.crc32(out))
    return bytes(out)


class _Reader:
    def __init__(self, buf):
        self.buf = buf
        self.pos = 0

    def take(self, n, what):
        if self.pos + n > len(self.buf):
            raise FormatError(f"truncated container while reading {what}", offset=self.pos)
        chunk = self.buf[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt, what):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def loads(buf):
    """Parse container bytes into a dict of name -> array (insertion-ordered)."""
    buf = bytes(buf)
    r = _Reader(buf)
    if r.take(len(MAGIC), "magic") != MAGIC:
        raise FormatError("bad magic, not a GMKD1 container", offset=0)
    (version,) = r.unpack("<H", "version")
    if version != VERSION:
        raise FormatError(f"unsupported container version {version}", offset=5)
    (count,) = r.unpack("<I", "tensor count")
    tensors = {}
    for index in range(count):
        start = r.pos
        (name_len,) = r.unpack("<H", f"name length of record {index}")
        try:
            name = r.take(name_len, f"name of record {index}").decode("utf-8")
        except UnicodeDecodeError:
            raise FormatError(f"record {index} name is not valid UTF-8", offset=start + 2) from None
        if name in tensors:
            raise FormatError(f"duplicate tensor name {name!r}", offset=start)
        code_pos = r.pos
        code, ndim = r.unpack("<BB", f"dtype/ndim of {name!r}")
        if code not in CODE_DTYPES:
            raise FormatError(f"unknown dtype code {code} for {name!r}", offset=code_pos)
        dims = r.unpack(f"<{ndim}I", f"dims of {name!r}")
        dtype = CODE_DTYPES[code]
        nbytes = prod(dims) * dtype.itemsize
        if r.pos + nbytes > len(buf):
            raise FormatError(
                f"tensor {name!r} declares {nbytes} data bytes but only {len(buf) - r.pos} remain", offset=r.pos
            )
        data = r.take(nbytes, f"data of {name!r}")
        tensors[name] = np.frombuffer(data, dtype=dtype).reshape(dims).astype(dtype.newbyteorder("="))
    if count:
        crc_pos = r.pos
        (crc,) = r.unpack("<I", "checksum")
        if crc != zlib.crc32(buf[:crc_pos]):
            raise FormatError("checksum mismatch, container is corrupted", offset=crc_pos)
    if r.pos != len(buf):
        raise FormatError(f"{len(buf) - r.pos} trailing bytes after declared end", offset=r.pos)
    return tensors


def save_checkpoint(tensors, path):
    path = Path(path)
    path.write_bytes(dumps(tensors))
    return path


def load_checkpoint(path):
    return loads(Path(path).read_bytes())
