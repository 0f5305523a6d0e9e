"""Decoupled feature distillation: match a frozen teacher's embeddings under Huber loss.

Only the image encoders take part; there is no mask decoder in the loop.
Teacher embeddings are computed once per item into a :class:`TeacherCache`
so each training step costs one student forward/backward.
"""
from __future__ import annotations

import csv
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from gmsam import numerics as nx
from gmsam.encoders.models import EncoderModel, embedding_shape, encode
from gmsam.errors import (
    CacheInvalidationError,
    ConfigurationError,
    DimensionError,
    FormatError,
    NumericDomainError,
    TrainingDivergenceError,
)
from gmsam.io.checkpoint import load_checkpoint, save_checkpoint

log = logging.getLogger(__name__)

PAPER_SETTINGS = {"image_size": 1024, "batch_size": 8, "learning_rate": 3e-4, "epochs": 13}


@dataclass
class DistillConfig:
    image_size: int = 64
    batch_size: int = 8
    learning_rate: float = 3e-4
    epochs: int = 13
    huber_delta: float = 1.0
    seed: int = 0
    precision: int = 32

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("image_size", "batch_size", "epochs", "huber_delta"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive, got {getattr(self, name)}")
        if self.learning_rate < 0:
            raise ConfigurationError(f"learning_rate must be non-negative, got {self.learning_rate}")
        if self.seed < 0:
            raise ConfigurationError(f"seed must be non-negative, got {self.seed}")
        if self.image_size % 16:
            raise ConfigurationError(f"image_size must be divisible by 16, got {self.image_size}")
        if self.precision not in (32, 64):
            raise ConfigurationError(f"precision must be 32 or 64, got {self.precision}")
        return self

    @property
    def dtype(self):
        return np.float32 if self.precision == 32 else np.float64


# -- teacher cache -------------------------------------------------------------


@dataclass
class TeacherCache:
    teacher_hash: str
    image_size: int
    embeddings: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.embeddings)

    @property
    def item_shape(self):
        s = self.image_size // 16
        return (1, 256, s, s)

    def validate(self, config=None, teacher=None):
        """Raise CacheInvalidationError unless the cache matches ``config``/``teacher``."""
        if config is not None and config.image_size != self.image_size:
            raise CacheInvalidationError(
                f"cache was built at image_size {self.image_size}, config asks for {config.image_size}"
            )
        if teacher is not None and teacher.fingerprint() != self.teacher_hash:
            raise CacheInvalidationError("cache was built by a different teacher (hash mismatch)")
        for item_id, emb in self.embeddings.items():
            if emb.shape != self.item_shape:
                raise CacheInvalidationError(f"cached embedding {item_id!r} has shape {emb.shape}")
        return self

    def target(self, item_id):
        try:
            return self.embeddings[item_id]
        except KeyError:
            raise CacheInvalidationError(f"item {item_id!r} is not in the teacher cache") from None

    def meta_text(self):
        return f"teacher_hash={self.teacher_hash}\nimage_size={self.image_size}\nitem_count={len(self)}\n"

    def save(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        save_checkpoint(self.embeddings, directory / "cache.gmkd")
        (directory / "cache.meta").write_text(self.meta_text())
        return directory

    @classmethod
    def load(cls, directory, config=None, teacher=None):
        directory = Path(directory)
        meta = {}
        for line in (directory / "cache.meta").read_text().splitlines():
            key, _, value = line.partition("=")
            meta[key.strip()] = value.strip()
        try:
            cache = cls(meta["teacher_hash"], int(meta["image_size"]), load_checkpoint(directory / "cache.gmkd"))
            count = int(meta["item_count"])
        except (KeyError, ValueError) as exc:
            raise FormatError(f"bad cache.meta in {directory}: {exc}") from None
        if count != len(cache):
            raise CacheInvalidationError(f"cache.meta declares {count} items, container holds {len(cache)}")
        return cache.validate(config, teacher)


def _teacher_embedding(teacher, image, dtype):
    with nx.no_grad():
        return encode(teacher, nx.Tensor(image[None].astype(dtype))).data


def cache_teacher(teacher, dataset, config, jobs=1):
    """Embed every dataset item with the frozen teacher (batch of one per item)."""
    if dataset.image_size != config.image_size:
        raise ConfigurationError(
            f"dataset is decoded at {dataset.image_size}px but config.image_size is {config.image_size}"
        )
    ids = dataset.ids

    def one(item_id):
        return _teacher_embedding(teacher, dataset.image(item_id), config.dtype)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            embeddings = list(pool.map(one, ids))
    else:
        embeddings = [one(i) for i in ids]
    return TeacherCache(teacher.fingerprint(), config.image_size, dict(zip(ids, embeddings)))


class LiveTeacher:
    """Computes teacher targets on demand instead of reading a cache."""

    def __init__(self, teacher, dataset, config):
        self.teacher, self.dataset, self.config = teacher, dataset, config
        self.image_size = config.image_size

    def target(self, item_id):
        return _teacher_embedding(self.teacher, self.dataset.image(item_id), self.config.dtype)


# -- training ----------------------------------------------------------------


@dataclass
class LossCurve:
    steps: list = field(default_factory=list)  # (step, epoch, loss)
    epochs: list = field(default_factory=list)  # (epoch, mean loss, seconds)

    @property
    def step_losses(self):
        return [loss for _, _, loss in self.steps]

    @property
    def epoch_means(self):
        return [m for _, m, _ in self.epochs]

    @property
    def last_loss(self):
        return self.epochs[-1][1] if self.epochs else float("nan")

    def write_csv(self, path, include_timing=False):
        """Per-step rows then per-epoch rows; timing is off by default so files are reproducible."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["kind", "step", "epoch", "loss"] + (["seconds"] if include_timing else []))
            for step, epoch, loss in self.steps:
                w.writerow(["step", step, epoch, repr(loss)] + ([""] if include_timing else []))
            for epoch, mean, secs in self.epochs:
                w.writerow(["epoch", "", epoch, repr(mean)] + ([f"{secs:.3f}"] if include_timing else []))


def epoch_order(seed, epoch, n):
    return np.random.default_rng([seed, epoch]).permutation(n)


def _targets_for(targets, ids, dtype):
    return np.concatenate([np.asarray(targets.target(i), dtype=dtype) for i in ids], axis=0)


def distill(student, dataset, targets, config, on_epoch=None):
    """Train ``student`` to reproduce teacher embeddings.

    ``targets`` is a :class:`TeacherCache` or a teacher :class:`EncoderModel`
    (evaluated live, item by item, giving the same numbers as the cache).
    ``on_epoch(epoch, student, curve)`` is called after every epoch.  Returns the
    trained student and its :class:`LossCurve`.
    """
    config.validate()
    if isinstance(targets, EncoderModel):
        targets = LiveTeacher(targets, dataset, config)
    elif isinstance(targets, TeacherCache):
        targets.validate(config)
    if dataset.image_size != config.image_size:
        raise ConfigurationError(
            f"dataset is decoded at {dataset.image_size}px but config.image_size is {config.image_size}"
        )
    expected = embedding_shape((1, 3, config.image_size, config.image_size))
    probe = targets.target(dataset.ids[0])
    if probe.shape != expected:
        raise DimensionError(f"teacher embedding shape {probe.shape} does not match student output {expected}")

    dtype = config.dtype
    student.astype(dtype)
    params = dict(student.named_parameters())
    state = nx.OptimizerState(learning_rate=config.learning_rate)
    curve = LossCurve()
    ids = dataset.ids
    n, step = len(ids), 0
    for epoch in range(config.epochs):
        start = time.perf_counter()
        losses = []
        order = epoch_order(config.seed, epoch, n)
        for lo in range(0, n, config.batch_size):
            batch_ids = [ids[k] for k in order[lo : lo + config.batch_size]]
            images = [dataset.image(i)[None].astype(dtype) for i in batch_ids]
            target = _targets_for(targets, batch_ids, dtype)
            student.zero_grad()
            try:
                # overflow is detected explicitly below, so numpy's warnings are redundant
                with np.errstate(over="ignore", invalid="ignore"):
                    # items go through the student one at a time, exactly as the teacher saw them,
                    # so BLAS batching cannot perturb the rounding of identical networks
                    pred = nx.concat([encode(student, nx.Tensor(im)) for im in images], axis=0)
                    if pred.shape != target.shape:
                        raise DimensionError(f"student output {pred.shape} vs teacher target {target.shape}")
                    loss = nx.huber_loss(pred, target, config.huber_delta)
                    value = float(loss.data)
                    if not np.isfinite(value):
                        raise TrainingDivergenceError(f"non-finite loss at step {step}", step=step)
                    loss.backward()
                    nx.optimizer_step(params, {k: p.grad for k, p in params.items()}, state)
            except TrainingDivergenceError as exc:
                if exc.step is not None:
                    raise
                raise TrainingDivergenceError(f"{exc} (step {step})", step=step, parameter=exc.parameter) from None
            except NumericDomainError as exc:
                raise TrainingDivergenceError(f"{exc} (step {step})", step=step) from None
            curve.steps.append((step, epoch, value))
            losses.append(value)
            step += 1
        mean_loss = float(np.mean(losses))
        curve.epochs.append((epoch, mean_loss, time.perf_counter() - start))
        log.info("epoch %d mean huber %.6g", epoch, mean_loss)
        if on_epoch is not None:
            on_epoch(epoch, student, curve)
    student.zero_grad()
    return student, curve


# -- reporting ---------------------------------------------------------------


@dataclass
class DistanceReport:
    per_item: dict  # item_id -> {"huber": float, "mse": float}
    mean_huber: float
    mean_mse: float

    def to_dict(self):
        return asdict(self)


def feature_distance_report(student, targets, dataset, huber_delta=1.0):
    """Per-item Huber and mean-squared distance between student and teacher embeddings."""
    dtype = student.parameters()[0].dtype
    if isinstance(targets, EncoderModel):
        targets = LiveTeacher(targets, dataset, DistillConfig(image_size=dataset.image_size,
                                                              precision=64 if dtype == np.float64 else 32))
    per_item = {}
    for item_id, image in dataset:
        with nx.no_grad():
            pred = encode(student, nx.Tensor(image[None].astype(dtype))).data.astype(np.float64)
        target = np.asarray(targets.target(item_id), dtype=np.float64)
        if pred.shape != target.shape:
            raise DimensionError(f"item {item_id!r}: student {pred.shape} vs teacher {target.shape}")
        r = pred - target
        a = np.abs(r)
        huber = np.where(a <= huber_delta, 0.5 * r * r, huber_delta * (a - 0.5 * huber_delta)).mean()
        per_item[item_id] = {"huber": float(huber), "mse": float((r * r).mean())}
    hub = [v["huber"] for v in per_item.values()]
    mse = [v["mse"] for v in per_item.values()]
    return DistanceReport(per_item, float(np.mean(hub)), float(np.mean(mse)))
