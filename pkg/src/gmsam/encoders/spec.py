"""Architecture descriptions and their plain-text ``key = value`` file format."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields
from pathlib import Path

from gmsam.errors import ConfigurationError

FAMILIES = ("teacher_vit", "student_gmf", "baseline_resnet")
EMBED_CHANNELS = 256
OUTPUT_STRIDE = 16


@dataclass(frozen=True)
class StageSpec:
    serial_depths: tuple
    stage_dims: tuple
    heads: tuple

    def __post_init__(self):
        for f in fields(self):
            object.__setattr__(self, f.name, tuple(int(v) for v in getattr(self, f.name)))

    @property
    def num_stages(self):
        return len(self.serial_depths)

    def validate(self):
        n = len(self.serial_depths)
        if not (len(self.stage_dims) == len(self.heads) == n):
            raise ConfigurationError(
                f"serial_depths, stage_dims and heads must have equal length, got "
                f"{len(self.serial_depths)}, {len(self.stage_dims)}, {len(self.heads)}"
            )
        if n not in (3, 4):
            raise ConfigurationError(f"encoders have 3 or 4 stages, got {n}")
        for name in ("serial_depths", "stage_dims", "heads"):
            if any(v <= 0 for v in getattr(self, name)):
                raise ConfigurationError(f"{name} entries must be positive, got {getattr(self, name)}")
        for dim, h in zip(self.stage_dims, self.heads):
            if dim % h:
                raise ConfigurationError(f"stage dim {dim} is not divisible by its head count {h}")


@dataclass(frozen=True)
class GmaBlockConfig:
    dim: int
    heads: int
    group_kernels: tuple = (1, 3, 5, 7)
    mlp_ratio: float = 4.0

    def __post_init__(self):
        object.__setattr__(self, "group_kernels", tuple(int(k) for k in self.group_kernels))

    @property
    def segment_width(self):
        return self.dim // len(self.group_kernels)

    def validate(self):
        if self.dim <= 0 or self.heads <= 0 or self.mlp_ratio <= 0:
            raise ConfigurationError(f"dim, heads and mlp_ratio must be positive: {self}")
        if self.dim % self.heads:
            raise ConfigurationError(f"dim {self.dim} is not divisible by heads {self.heads}")
        if not self.group_kernels:
            raise ConfigurationError("group_kernels must not be empty")
        if self.dim % len(self.group_kernels):
            raise ConfigurationError(
                f"dim {self.dim} cannot be split into {len(self.group_kernels)} equal channel segments"
            )
        bad = [k for k in self.group_kernels if k <= 0 or k % 2 == 0]
        if bad:
            raise ConfigurationError(f"group aggregator kernels must be odd and positive, got {bad}")


@dataclass(frozen=True)
class EncoderSpec:
    """Everything needed to build one encoder.

    ``teacher_vit`` uses ``patch_size``/``width``/``depth``/``num_heads``; the
    staged families (``student_gmf``, ``baseline_resnet``) use ``stages``.
    """

    family: str
    name: str = ""
    patch_size: int = 16
    width: int = 32
    depth: int = 4
    num_heads: int = 2
    stages: StageSpec | None = None
    group_kernels: tuple = (1, 3, 5, 7)
    mlp_ratio: float = 4.0
    embed_out: int = EMBED_CHANNELS

    def __post_init__(self):
        object.__setattr__(self, "group_kernels", tuple(int(k) for k in self.group_kernels))
        object.__setattr__(self, "mlp_ratio", float(self.mlp_ratio))

    def validate(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown encoder family {self.family!r}; expected one of {FAMILIES}")
        if self.embed_out != EMBED_CHANNELS:
            raise ConfigurationError(f"embed_out must be {EMBED_CHANNELS}, got {self.embed_out}")
        if self.family == "teacher_vit":
            if self.patch_size != OUTPUT_STRIDE:
                raise ConfigurationError(f"teacher patch_size must be {OUTPUT_STRIDE} to keep stride 16")
            for cfg in self.block_configs():
                cfg.validate()
            if self.depth <= 0:
                raise ConfigurationError(f"teacher depth must be positive, got {self.depth}")
            return self
        if self.stages is None:
            raise ConfigurationError(f"family {self.family} requires a stage description")
        self.stages.validate()
        if self.family == "student_gmf":
            for cfg in self.block_configs():
                cfg.validate()
        return self

    def block_configs(self):
        if self.family == "teacher_vit":
            return [GmaBlockConfig(self.width, self.num_heads, (1,), self.mlp_ratio)]
        return [
            GmaBlockConfig(d, h, self.group_kernels, self.mlp_ratio)
            for d, h in zip(self.stages.stage_dims, self.stages.heads)
        ]

    def stage_strides(self):
        """Downsampling per stage (stem first); the product is always 16."""
        if self.family == "teacher_vit":
            return [self.patch_size]
        n = self.stages.num_stages
        stem = OUTPUT_STRIDE // 2 ** (n - 2)
        return [stem] + [2] * (n - 2) + [1]

    def structure(self):
        return list(self.stages.serial_depths) if self.stages else []

    def to_text(self):
        return dumps(self)

    def fingerprint(self):
        return hashlib.sha256(dumps(self).encode()).hexdigest()


def _ints(text):
    return tuple(int(v) for v in text.replace(" ", "").split(",") if v)


def dumps(spec):
    lines = [f"family = {spec.family}"]
    if spec.name:
        lines.append(f"name = {spec.name}")
    if spec.family == "teacher_vit":
        lines += [
            f"patch_size = {spec.patch_size}",
            f"width = {spec.width}",
            f"depth = {spec.depth}",
            f"num_heads = {spec.num_heads}",
        ]
    else:
        st = spec.stages
        lines += [
            "serial_depths = " + ",".join(map(str, st.serial_depths)),
            "stage_dims = " + ",".join(map(str, st.stage_dims)),
            "heads = " + ",".join(map(str, st.heads)),
        ]
        if spec.family == "student_gmf":
            lines.append("group_kernels = " + ",".join(map(str, spec.group_kernels)))
    if spec.family != "baseline_resnet":
        lines.append(f"mlp_ratio = {spec.mlp_ratio!r}")
    lines.append(f"embed_out = {spec.embed_out}")
    return "\n".join(lines) + "\n"


_SCALAR_KEYS = {"patch_size": int, "width": int, "depth": int, "num_heads": int, "embed_out": int,
                "mlp_ratio": float, "name": str, "family": str}
_STAGE_KEYS = ("serial_depths", "stage_dims", "heads")


def loads(text, source="<string>"):
    """Parse ``key = value`` lines (``#`` starts a comment) into an EncoderSpec."""
    values, stage = {}, {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        try:
            if key in _STAGE_KEYS:
                stage[key] = _ints(value)
            elif key == "group_kernels":
                values[key] = _ints(value)
            elif key in _SCALAR_KEYS:
                values[key] = _SCALAR_KEYS[key](value)
            else:
                raise ConfigurationError(f"{source}:{lineno}: unknown key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigurationError):
                raise
            raise ConfigurationError(f"{source}:{lineno}: bad value for {key!r}: {value!r}") from None
    if "family" not in values:
        raise ConfigurationError(f"{source}: missing required key 'family'")
    if stage:
        missing = [k for k in _STAGE_KEYS if k not in stage]
        if missing:
            raise ConfigurationError(f"{source}: missing stage keys {missing}")
        values["stages"] = StageSpec(**stage)
    return EncoderSpec(**values).validate()


def load_spec(path):
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"spec file not found: {path}")
    return loads(path.read_text(), source=str(path))


def save_spec(spec, path):
    Path(path).write_text(dumps(spec))


# -- presets -----------------------------------------------------------------

TABLE2_STRUCTURES = ([3, 3, 12, 4], [3, 3, 12], [3, 3, 4, 4], [2, 2, 6, 4], [2, 2, 8, 2])


def toy_teacher(width=32, depth=4, num_heads=2, name="vit_toy"):
    return EncoderSpec("teacher_vit", name=name, width=width, depth=depth, num_heads=num_heads).validate()


def toy_student(serial_depths=(2, 2, 2, 2), stage_dims=None, heads=None, name=None):
    serial_depths = tuple(serial_depths)
    n = len(serial_depths)
    if stage_dims is None:
        stage_dims = (16, 32, 64, 256)[:n]
    if heads is None:
        heads = (1, 2, 4, 4)[:n]
    name = name or "gmf_" + "".join(map(str, serial_depths))
    return EncoderSpec("student_gmf", name=name, stages=StageSpec(serial_depths, stage_dims, heads)).validate()


def toy_baseline(serial_depths=(1, 1, 1, 1), stage_dims=(16, 32, 64, 64), name="resnet_toy"):
    n = len(serial_depths)
    return EncoderSpec(
        "baseline_resnet", name=name, stages=StageSpec(serial_depths, stage_dims, (1,) * n)
    ).validate()
