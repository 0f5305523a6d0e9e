"""Binary PGM (P5) / PPM (P6) reading and writing, plus feature-map export."""
from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from gmsam.errors import DimensionError, FormatError

log = logging.getLogger(__name__)


def _read_netpbm(path, magic):
    buf = Path(path).read_bytes()
    if buf[:2] != magic:
        raise FormatError(f"{path}: expected {magic.decode()} header, got {buf[:2]!r}", offset=0)
    fields, pos = [], 2
    while len(fields) < 3:
        while pos < len(buf) and buf[pos : pos + 1].isspace():
            pos += 1
        if pos < len(buf) and buf[pos : pos + 1] == b"#":
            while pos < len(buf) and buf[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(buf) and buf[pos : pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: malformed header", offset=pos)
        fields.append(int(buf[start:pos]))
    pos += 1  # single whitespace byte before the raster
    width, height, maxval = fields
    if not (0 < maxval < 65536) or width <= 0 or height <= 0:
        raise FormatError(f"{path}: bad header values {fields}", offset=2)
    channels = 3 if magic == b"P6" else 1
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    n = width * height * channels * dtype.itemsize
    raster = buf[pos : pos + n]
    if len(raster) != n:
        raise FormatError(f"{path}: raster truncated ({len(raster)} of {n} bytes)", offset=pos)
    arr = np.frombuffer(raster, dtype=dtype).reshape(height, width, channels)
    return arr.astype(np.float32) / maxval


def read_ppm(path):
    """Read a binary PPM as a (3, H, W) float32 array in [0, 1]."""
    return np.ascontiguousarray(_read_netpbm(path, b"P6").transpose(2, 0, 1))


def read_pgm(path):
    """Read a binary PGM as an (H, W) uint8 array."""
    return np.rint(_read_netpbm(path, b"P5")[:, :, 0] * 255).astype(np.uint8)


def write_ppm(image, path):
    """Write a (3, H, W) array in [0, 1] as binary PPM."""
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[0] != 3:
        raise DimensionError(f"PPM export needs a (3, H, W) image, got {image.shape}")
    raster = np.rint(np.clip(image, 0, 1) * 255).astype(np.uint8).transpose(1, 2, 0)
    _, h, w = image.shape
    Path(path).write_bytes(f"P6\n{w} {h}\n255\n".encode() + raster.tobytes())


def write_pgm(pixels, path):
    """Write an (H, W) uint8 array as binary PGM."""
    pixels = np.asarray(pixels)
    if pixels.ndim != 2:
        raise DimensionError(f"PGM export needs a 2-d array, got {pixels.shape}")
    h, w = pixels.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode() + pixels.astype(np.uint8).tobytes())


def normalize_to_bytes(slice2d):
    """Min-max scale to 0..255; a constant slice becomes mid-gray 128."""
    s = np.asarray(slice2d, dtype=np.float64)
    lo, hi = s.min(), s.max()
    if hi == lo:
        log.warning("feature slice is constant (%g); writing mid-gray", lo)
        return np.full(s.shape, 128, dtype=np.uint8)
    return np.rint((s - lo) / (hi - lo) * 255).astype(np.uint8)


def export_feature_pgm(embedding, path, mode="first_channel"):
    """Visualise one (1, C, h, w) embedding as an h x w grayscale PGM.

    ``first_channel`` shows channel 0, ``channel_mean`` the mean over channels.
    """
    emb = np.asarray(getattr(embedding, "data", embedding))
    if emb.ndim != 4 or emb.shape[0] != 1:
        raise DimensionError(f"feature export needs a batch-1 (1, C, h, w) embedding, got {emb.shape}")
    if mode == "first_channel":
        s = emb[0, 0]
    elif mode == "channel_mean":
        s = emb[0].mean(axis=0)
    else:
        raise ValueError(f"unknown export mode {mode!r}")
    pixels = normalize_to_bytes(s)
    write_pgm(pixels, path)
    return pixels


def export_mask_pgm(mask, path):
    """Write a binary mask as a 0/255 PGM."""
    write_pgm(np.asarray(getattr(mask, "data", mask), dtype=np.uint8) * 255, path)
