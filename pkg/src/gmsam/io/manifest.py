"""Dataset manifests (``item_id<TAB>source`` text) and image decoding."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from gmsam.errors import ConfigurationError, FormatError, IngestionError
from gmsam.io.images import read_ppm
from gmsam.io.synthetic import synthetic_image

SYNTHETIC_PREFIX = "synthetic:"


@dataclass
class DatasetManifest:
    """Ordered (item_id, source) pairs; source is a PPM path or ``synthetic:<seed>``."""

    items: list
    image_size: int
    split: str = "train"
    root: Path | None = field(default=None, compare=False)

    def __post_init__(self):
        self.items = [(str(i), str(s)) for i, s in self.items]
        ids = [i for i, _ in self.items]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ConfigurationError(f"duplicate item ids in manifest: {dupes[:5]}")
        if self.image_size <= 0 or self.image_size % 16:
            raise ConfigurationError(f"image_size must be a positive multiple of 16, got {self.image_size}")

    def __len__(self):
        return len(self.items)

    @property
    def ids(self):
        return [i for i, _ in self.items]

    def to_text(self):
        lines = [f"# image_size={self.image_size}", f"# split={self.split}"]
        lines += [f"{i}\t{s}" for i, s in self.items]
        return "\n".join(lines) + "\n"

    def save(self, path):
        Path(path).write_text(self.to_text())

    @classmethod
    def from_text(cls, text, root=None):
        meta, items = {}, []
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key.strip()] = value.strip()
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0]:
                raise FormatError(f"manifest line {lineno}: expected 'item_id<TAB>source', got {line!r}")
            items.append((parts[0], parts[1]))
        if "image_size" not in meta:
            raise FormatError("manifest is missing the '# image_size=' header")
        return cls(items, image_size=int(meta["image_size"]), split=meta.get("split", "train"), root=root)

    @classmethod
    def load(cls, path):
        path = Path(path)
        if not path.is_file():
            raise ConfigurationError(f"manifest not found: {path}")
        return cls.from_text(path.read_text(), root=path.parent)


def _resize_nearest(img, size):
    _, h, w = img.shape
    rows = (np.arange(size) * h) // size
    cols = (np.arange(size) * w) // size
    return np.ascontiguousarray(img[:, rows][:, :, cols])


def decode_item(item_id, source, image_size, root=None):
    """Decode one manifest entry to a (3, S, S) float32 image."""
    try:
        if source.startswith(SYNTHETIC_PREFIX):
            return synthetic_image(int(source[len(SYNTHETIC_PREFIX):]), image_size)[0]
        path = Path(source)
        if root is not None and not path.is_absolute():
            path = Path(root) / path
        img = read_ppm(path)
    except (OSError, ValueError) as exc:
        raise IngestionError(f"cannot decode item {item_id!r} from {source!r}: {exc}") from exc
    if img.shape[1:] != (image_size, image_size):
        img = _resize_nearest(img, image_size)
    return img


class Dataset:
    """Images of a manifest, decoded lazily and cached in memory."""

    def __init__(self, manifest, images=None):
        self.manifest = manifest
        self._cache = {}
        if images is not None:
            if len(images) != len(manifest):
                raise ConfigurationError(f"{len(images)} images for {len(manifest)} manifest items")
            self._cache = {i: np.asarray(img, dtype=np.float32) for i, img in zip(manifest.ids, images)}

    @classmethod
    def synthetic(cls, seed, count, image_size, split="train"):
        from gmsam.io.synthetic import generate_synthetic

        manifest, images = generate_synthetic(seed, count, image_size, split)
        return cls(manifest, images)

    @classmethod
    def load(cls, path):
        return cls(DatasetManifest.load(path))

    def __len__(self):
        return len(self.manifest)

    @property
    def ids(self):
        return self.manifest.ids

    @property
    def image_size(self):
        return self.manifest.image_size

    def image(self, item_id):
        if item_id not in self._cache:
            source = dict(self.manifest.items)[item_id]
            self._cache[item_id] = decode_item(item_id, source, self.image_size, self.manifest.root)
        return self._cache[item_id]

    def __getitem__(self, index):
        item_id = self.manifest.items[index][0]
        return item_id, self.image(item_id)

    def __iter__(self):
        for item_id in self.ids:
            yield item_id, self.image(item_id)

    def subset(self, ids):
        items = dict(self.manifest.items)
        sub = DatasetManifest([(i, items[i]) for i in ids], self.image_size, self.manifest.split,
                              self.manifest.root)
        return Dataset(sub, [self.image(i) for i in ids])
