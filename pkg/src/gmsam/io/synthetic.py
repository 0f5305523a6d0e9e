"""Seeded synthetic images: a smooth colour gradient with 1-4 filled shapes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ShapeInfo:
    kind: str
    center: tuple  # (x, y) pixels
    box: tuple  # (x0, y0, x1, y1) pixels, half-open


def item_seed(seed, index):
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def synthetic_image(seed, size):
    """Return a (3, size, size) float32 image in [0, 1] and its shapes."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64) + 0.5
    theta = rng.uniform(0, 2 * np.pi)
    t = (np.cos(theta) * xx + np.sin(theta) * yy) / size
    t = (t - t.min()) / max(t.max() - t.min(), 1e-12)
    c0, c1 = rng.uniform(0, 1, 3), rng.uniform(0, 1, 3)
    img = c0[:, None, None] * (1 - t) + c1[:, None, None] * t
    shapes = []
    for _ in range(int(rng.integers(1, 5))):
        kind = ("circle", "rectangle", "triangle")[int(rng.integers(0, 3))]
        half = rng.uniform(0.12, 0.25) * size
        cx, cy = rng.uniform(half, size - half, 2)
        color = rng.uniform(0, 1, 3)
        if kind == "circle":
            inside = (xx - cx) ** 2 + (yy - cy) ** 2 <= half ** 2
        elif kind == "rectangle":
            aspect = rng.uniform(0.6, 1.0)
            inside = (np.abs(xx - cx) <= half) & (np.abs(yy - cy) <= half * aspect)
        else:
            # upward triangle with apex at top, base at cy + half
            rel = (yy - (cy - half)) / (2 * half)
            inside = (rel >= 0) & (rel <= 1) & (np.abs(xx - cx) <= rel * half)
        if not inside.any():
            continue
        img[:, inside] = color[:, None]
        ys, xs = np.nonzero(inside)
        shapes.append(ShapeInfo(kind, (float(cx), float(cy)),
                                (int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1)))
    return np.clip(img, 0.0, 1.0).astype(np.float32), shapes


def generate_synthetic(seed, count, image_size, split="train"):
    """Build a manifest of ``count`` synthetic items and decode their images."""
    from gmsam.io.manifest import DatasetManifest

    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}")
    items = [(f"syn_{i:05d}", f"synthetic:{item_seed(seed, i)}") for i in range(count)]
    manifest = DatasetManifest(items, image_size=image_size, split=split)
    images = [synthetic_image(item_seed(seed, i), image_size)[0] for i in range(count)]
    return manifest, images
