"""Prompted mask decoding and teacher-as-ground-truth mIoU evaluation.

The decoder is deliberately simple and shared by every pipeline: the prompt
picks a query vector out of the embedding, each embedding cell is scored by
cosine similarity to it, and the upsampled score map is thresholded.  With
the decoder held fixed, mIoU differences between two pipelines come from
their encoders alone.
"""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from gmsam import numerics as nx
from gmsam.encoders.models import encode
from gmsam.errors import DimensionError, FormatError, PromptError, ProtocolError

DEFAULT_THRESHOLD = 0.5


@dataclass(frozen=True)
class Prompt:
    kind: str  # "point" or "box"
    coords: tuple  # (x, y) or (x0, y0, x1, y1), pixels

    @classmethod
    def point(cls, x, y):
        return cls("point", (float(x), float(y)))

    @classmethod
    def box(cls, x0, y0, x1, y1):
        return cls("box", (float(x0), float(y0), float(x1), float(y1)))

    def validate(self, image_size):
        h, w = image_size
        if self.kind == "point":
            x, y = self.coords
            if not (0 <= x < w and 0 <= y < h):
                raise PromptError(f"point ({x}, {y}) outside {w}x{h} image")
        elif self.kind == "box":
            x0, y0, x1, y1 = self.coords
            if not (x0 < x1 and y0 < y1):
                raise PromptError(f"degenerate box {self.coords}")
            if x0 < 0 or y0 < 0 or x1 > w or y1 > h:
                raise PromptError(f"box {self.coords} outside {w}x{h} image")
        else:
            raise PromptError(f"unknown prompt kind {self.kind!r}")
        return self


@dataclass
class Mask:
    data: np.ndarray  # bool (H, W)
    source: str = ""

    @property
    def shape(self):
        return self.data.shape


def _sample_positions(n_out, n_in):
    """Source coordinates (half-pixel convention) and bilinear weights, edge-clamped."""
    pos = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    pos = np.clip(pos, 0, n_in - 1)
    lo = np.floor(pos).astype(int)
    hi = np.minimum(lo + 1, n_in - 1)
    return lo, hi, pos - lo


def upsample_bilinear(grid, size):
    """Resize a 2-d array to ``size = (H, W)`` bilinearly."""
    H, W = size
    r0, r1, fr = _sample_positions(H, grid.shape[0])
    c0, c1, fc = _sample_positions(W, grid.shape[1])
    top = grid[r0][:, c0] * (1 - fc) + grid[r0][:, c1] * fc
    bottom = grid[r1][:, c0] * (1 - fc) + grid[r1][:, c1] * fc
    return top * (1 - fr)[:, None] + bottom * fr[:, None]


def prompt_query(emb, prompt, image_size):
    """Query vector (C,) for a prompt on a (C, h, w) embedding."""
    C, h, w = emb.shape
    H, W = image_size
    sy, sx = H / h, W / w
    if prompt.kind == "point":
        x, y = prompt.coords
        u = min(max((x + 0.5) / sx - 0.5, 0.0), w - 1)
        v = min(max((y + 0.5) / sy - 0.5, 0.0), h - 1)
        c0, r0 = int(np.floor(u)), int(np.floor(v))
        c1, r1 = min(c0 + 1, w - 1), min(r0 + 1, h - 1)
        fu, fv = u - c0, v - r0
        return ((emb[:, r0, c0] * (1 - fu) + emb[:, r0, c1] * fu) * (1 - fv)
                + (emb[:, r1, c0] * (1 - fu) + emb[:, r1, c1] * fu) * fv)
    x0, y0, x1, y1 = prompt.coords
    c_lo, c_hi = int(np.floor(x0 / sx)), max(int(np.ceil(x1 / sx)), int(np.floor(x0 / sx)) + 1)
    r_lo, r_hi = int(np.floor(y0 / sy)), max(int(np.ceil(y1 / sy)), int(np.floor(y0 / sy)) + 1)
    return emb[:, r_lo:r_hi, c_lo:c_hi].mean(axis=(1, 2))


def similarity_map(embedding, prompt, image_size):
    """Upsampled cosine similarity between the prompt query and every cell."""
    emb = np.asarray(getattr(embedding, "data", embedding), dtype=np.float64)
    if emb.ndim == 4:
        if emb.shape[0] != 1:
            raise DimensionError(f"decode one embedding at a time, got batch {emb.shape[0]}")
        emb = emb[0]
    if emb.ndim != 3:
        raise DimensionError(f"embedding must be (1, C, h, w) or (C, h, w), got {emb.shape}")
    prompt.validate(image_size)
    q = prompt_query(emb, prompt, image_size)
    cells = emb.reshape(emb.shape[0], -1)
    qn = np.linalg.norm(q)
    cn = np.linalg.norm(cells, axis=0)
    denom = qn * cn
    sim = np.divide(q @ cells, denom, out=np.zeros(cells.shape[1]), where=denom > 0)
    return upsample_bilinear(sim.reshape(emb.shape[1:]), image_size)


def decode_mask(embedding, prompt, image_size, threshold=DEFAULT_THRESHOLD, source=""):
    """Binary mask of pixels whose similarity to the prompt query is at least ``threshold``."""
    return Mask(similarity_map(embedding, prompt, image_size) >= threshold, source)


def iou(a, b):
    """Intersection over union; two empty masks count as a perfect match."""
    a = np.asarray(getattr(a, "data", a), dtype=bool)
    b = np.asarray(getattr(b, "data", b), dtype=bool)
    if a.shape != b.shape:
        raise DimensionError(f"mask shapes differ: {a.shape} vs {b.shape}")
    union = int(np.count_nonzero(a | b))
    if union == 0:
        return 1.0
    return int(np.count_nonzero(a & b)) / union


class SegmentationPipeline:
    """An encoder plus the shared similarity decoder."""

    def __init__(self, encoder, threshold=DEFAULT_THRESHOLD, name=None):
        self.encoder = encoder
        self.threshold = threshold
        self.name = name or getattr(encoder, "name", "pipeline")

    def embed(self, image):
        dtype = self.encoder.parameters()[0].dtype
        with nx.no_grad():
            return encode(self.encoder, nx.Tensor(np.asarray(image)[None].astype(dtype))).data

    def predict(self, image, prompt):
        size = np.asarray(image).shape[-2:]
        return decode_mask(self.embed(image), prompt, size, self.threshold, source=self.name)


class MaskPipeline:
    """Pipeline stand-in that returns fixed masks (tests and baselines)."""

    def __init__(self, fn, name="fixed"):
        self.fn, self.name = fn, name

    def predict(self, image, prompt):
        return Mask(np.asarray(self.fn(image, prompt), dtype=bool), self.name)


@dataclass
class EvalResult:
    per_image: list  # (item_id, iou)
    encoder: str
    prompt_kind: str
    dataset: str = ""
    reference: str = ""

    @property
    def ious(self):
        return [v for _, v in self.per_image]

    @property
    def miou(self):
        return float(np.mean(self.ious)) if self.per_image else float("nan")

    def summary(self):
        return f"mIoU={self.miou:.6f}"

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["image_id", "iou"])
            for item_id, v in self.per_image:
                w.writerow([item_id, f"{v:.6f}"])
            w.writerow(["mIoU", f"{self.miou:.6f}"])


def evaluate_miou(teacher_pipeline, student_pipeline, dataset, prompts, jobs=1, dataset_name=""):
    """Score the student's masks against the teacher's masks taken as ground truth."""
    items = list(dataset.ids)
    if isinstance(prompts, dict):
        missing = [i for i in items if i not in prompts]
        if missing or len(prompts) != len(items):
            raise ProtocolError(f"prompts do not match dataset items (missing {missing[:5]})")
        prompts = [prompts[i] for i in items]
    if len(prompts) != len(items):
        raise ProtocolError(f"{len(prompts)} prompts for {len(items)} images; need exactly one each")
    if not items:
        raise ProtocolError("no items to evaluate")

    def one(k):
        image = dataset.image(items[k])
        return iou(teacher_pipeline.predict(image, prompts[k]), student_pipeline.predict(image, prompts[k]))

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            scores = list(pool.map(one, range(len(items))))
    else:
        scores = [one(k) for k in range(len(items))]
    kinds = sorted({p.kind for p in prompts})
    return EvalResult(list(zip(items, scores)), student_pipeline.name, "/".join(kinds), dataset_name,
                      teacher_pipeline.name)


# -- prompt files ------------------------------------------------------------


def write_prompts(prompts, path):
    """``item_id<TAB>kind<TAB>comma-separated coords`` per line."""
    lines = [f"{i}\t{p.kind}\t" + ",".join(repr(c) for c in p.coords) for i, p in prompts.items()]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def read_prompts(path):
    prompts = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        try:
            item_id, kind, coords = parts
            values = tuple(float(v) for v in coords.split(","))
        except ValueError:
            raise FormatError(f"{path}:{lineno}: expected 'item_id<TAB>kind<TAB>coords'") from None
        if (kind, len(values)) not in (("point", 2), ("box", 4)):
            raise FormatError(f"{path}:{lineno}: bad {kind!r} prompt with {len(values)} coordinates")
        if item_id in prompts:
            raise FormatError(f"{path}:{lineno}: duplicate prompt for {item_id!r}")
        prompts[item_id] = Prompt(kind, values)
    return prompts


def default_prompts(dataset, kind="point"):
    """One prompt per item: the topmost synthetic shape (or the image centre)."""
    from gmsam.io.manifest import SYNTHETIC_PREFIX
    from gmsam.io.synthetic import synthetic_image

    size = dataset.image_size
    prompts = {}
    for item_id, source in dataset.manifest.items:
        shape = None
        if source.startswith(SYNTHETIC_PREFIX):
            shapes = synthetic_image(int(source[len(SYNTHETIC_PREFIX):]), size)[1]
            shape = shapes[-1] if shapes else None
        if kind == "point":
            cx, cy = shape.center if shape else (size / 2, size / 2)
            prompts[item_id] = Prompt.point(min(int(cx), size - 1), min(int(cy), size - 1))
        else:
            prompts[item_id] = Prompt.box(*shape.box) if shape else Prompt.box(0, 0, size, size)
    return prompts
