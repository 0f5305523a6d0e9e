"""The three encoder families: ViT teacher, GMA student, residual-conv baseline."""
from __future__ import annotations

import hashlib
from math import prod

import numpy as np

from gmsam import numerics as nx
from gmsam.encoders.gma import GmaBlock
from gmsam.encoders.layers import Conv2d, LayerNorm2d, Module, Sequential
from gmsam.encoders.spec import EMBED_CHANNELS, OUTPUT_STRIDE, EncoderSpec
from gmsam.errors import ConfigurationError, DimensionError, NumericDomainError


PIXEL_MEAN = (0.485, 0.456, 0.406)
PIXEL_STD = (0.229, 0.224, 0.225)


class EncoderModel(Module):
    """Image (b, 3, H, W) in [0, 1] -> embedding (b, 256, H/16, W/16).

    Pixels are standardised per channel before the first layer.
    """

    spec: EncoderSpec

    def normalize(self, x):
        mean = np.asarray(PIXEL_MEAN, dtype=x.dtype).reshape(1, 3, 1, 1)
        inv_std = (1 / np.asarray(PIXEL_STD, dtype=np.float64)).astype(x.dtype).reshape(1, 3, 1, 1)
        return (x - mean) * inv_std

    def _input_rows(self, shape):
        return [("input_norm", 2 * prod(shape))]

    def _head(self, rng, width):
        self.norm = LayerNorm2d(width)
        self.neck = Conv2d(width, EMBED_CHANNELS, 1, rng)

    def _head_rows(self, shape):
        rows, shape = self.norm.flop_rows(shape, "norm.")
        r, shape = self.neck.flop_rows(shape, "neck.")
        return rows + r, shape

    @property
    def name(self):
        return self.spec.name or self.spec.family

    def fingerprint(self):
        """Hash of the architecture and the exact parameter bytes."""
        h = hashlib.sha256(self.spec.to_text().encode())
        for name, p in self.named_parameters():
            h.update(name.encode())
            h.update(p.data.dtype.str.encode())
            h.update(p.data.tobytes())
        return h.hexdigest()


class VitTeacher(EncoderModel):
    """Patch-16 ViT with a depthwise-conv position encoding and a 256-channel neck."""

    def __init__(self, spec, rng):
        super().__init__()
        self.spec = spec
        w = spec.width
        self.patch_embed = Conv2d(3, w, spec.patch_size, rng, stride=spec.patch_size)
        self.pos = Conv2d(w, w, 3, rng, padding=1, groups=w)
        self.blocks = Sequential(*[GmaBlock(spec.block_configs()[0], rng) for _ in range(spec.depth)])
        self._head(rng, w)

    def forward(self, x):
        x = self.patch_embed(self.normalize(x))
        x = x + self.pos(x)
        x = self.blocks(x)
        return self.neck(self.norm(x))

    def flop_rows(self, shape, prefix=""):
        rows = self._input_rows(shape)
        r, shape = self.patch_embed.flop_rows(shape, "patch_embed.")
        rows += r
        r, _ = self.pos.flop_rows(shape, "pos.")
        rows += r + [("pos.residual", prod(shape))]
        r, shape = self.blocks.flop_rows(shape, "blocks.")
        rows += r
        r, shape = self._head_rows(shape)
        return rows + r, shape


class GmfStudent(EncoderModel):
    """Staged GroupMixFormer-style encoder.

    A patchify stem (stride 4 for four stages, 8 for three) is followed by
    stages of GMA blocks.  Stages are joined by 3x3 convolutions that halve the
    resolution, except the one entering the last stage which keeps it, so the
    cumulative stride is 16 for either stage count.
    """

    def __init__(self, spec, rng):
        super().__init__()
        self.spec = spec
        st = spec.stages
        strides = spec.stage_strides()
        dims = st.stage_dims
        self.stem = Conv2d(3, dims[0], strides[0], rng, stride=strides[0])
        self.stem_norm = LayerNorm2d(dims[0])
        configs = spec.block_configs()
        for i in range(st.num_stages):
            if i > 0:
                setattr(self, f"down{i}", Conv2d(dims[i - 1], dims[i], 3, rng, stride=strides[i], padding=1))
                setattr(self, f"down{i}_norm", LayerNorm2d(dims[i]))
            setattr(self, f"stage{i}", Sequential(*[GmaBlock(configs[i], rng) for _ in range(st.serial_depths[i])]))
        self._head(rng, dims[-1])

    def stages(self):
        return [getattr(self, f"stage{i}") for i in range(self.spec.stages.num_stages)]

    def forward(self, x):
        x = self.stem_norm(self.stem(self.normalize(x)))
        for i, stage in enumerate(self.stages()):
            if i > 0:
                x = getattr(self, f"down{i}_norm")(getattr(self, f"down{i}")(x))
            x = stage(x)
        return self.neck(self.norm(x))

    def flop_rows(self, shape, prefix=""):
        rows = self._input_rows(shape)
        r, shape = self.stem.flop_rows(shape, "stem.")
        rows += r
        r, _ = self.stem_norm.flop_rows(shape, "stem_norm.")
        rows += r
        for i, stage in enumerate(self.stages()):
            if i > 0:
                r, shape = getattr(self, f"down{i}").flop_rows(shape, f"down{i}.")
                rows += r
                r, _ = getattr(self, f"down{i}_norm").flop_rows(shape, f"down{i}_norm.")
                rows += r
            r, shape = stage.flop_rows(shape, f"stage{i}.")
            rows += r
        r, shape = self._head_rows(shape)
        return rows + r, shape


class BasicBlock(Module):
    def __init__(self, in_ch, out_ch, stride, rng):
        super().__init__()
        self.conv1 = Conv2d(in_ch, out_ch, 3, rng, stride=stride, padding=1)
        self.conv2 = Conv2d(out_ch, out_ch, 3, rng, padding=1)
        self.shortcut = Conv2d(in_ch, out_ch, 1, rng, stride=stride) if (stride != 1 or in_ch != out_ch) else None

    def forward(self, x):
        y = self.conv2(nx.relu(self.conv1(x)))
        skip = self.shortcut(x) if self.shortcut is not None else x
        return nx.relu(y + skip)

    def flop_rows(self, shape, prefix=""):
        rows, s = self.conv1.flop_rows(shape, prefix + "conv1.")
        rows.append((prefix + "relu1", prod(s)))
        r, s = self.conv2.flop_rows(s, prefix + "conv2.")
        rows += r
        if self.shortcut is not None:
            r, _ = self.shortcut.flop_rows(shape, prefix + "shortcut.")
            rows += r
        rows.append((prefix + "residual", 2 * prod(s)))
        return rows, s


class ResnetBaseline(EncoderModel):
    """Small residual CNN with the same stage strides and neck as the GMA student."""

    def __init__(self, spec, rng):
        super().__init__()
        self.spec = spec
        st = spec.stages
        strides = spec.stage_strides()
        dims = st.stage_dims
        self.stem = Conv2d(3, dims[0], strides[0], rng, stride=strides[0])
        blocks = []
        in_ch = dims[0]
        for i, (depth, dim) in enumerate(zip(st.serial_depths, dims)):
            for j in range(depth):
                stride = strides[i] if (i > 0 and j == 0) else 1
                blocks.append(BasicBlock(in_ch, dim, stride, rng))
                in_ch = dim
        self.blocks = Sequential(*blocks)
        self._head(rng, dims[-1])

    def forward(self, x):
        x = nx.relu(self.stem(self.normalize(x)))
        return self.neck(self.norm(self.blocks(x)))

    def flop_rows(self, shape, prefix=""):
        rows = self._input_rows(shape)
        r, shape = self.stem.flop_rows(shape, "stem.")
        rows += r + [("stem.relu", prod(shape))]
        r, shape = self.blocks.flop_rows(shape, "blocks.")
        rows += r
        r, shape = self._head_rows(shape)
        return rows + r, shape


_FAMILIES = {"teacher_vit": VitTeacher, "student_gmf": GmfStudent, "baseline_resnet": ResnetBaseline}


def build_encoder(spec, seed=0):
    """Deterministically initialise an encoder (trunc-normal 0.02 weights, zero biases)."""
    if not isinstance(spec, EncoderSpec):
        raise ConfigurationError(f"expected an EncoderSpec, got {type(spec).__name__}")
    spec.validate()
    return _FAMILIES[spec.family](spec, np.random.default_rng(seed))


def check_image_shape(shape):
    if len(shape) != 4 or shape[1] != 3:
        raise DimensionError(f"images must be (batch, 3, H, W), got {tuple(shape)}")
    if shape[2] % OUTPUT_STRIDE or shape[3] % OUTPUT_STRIDE:
        raise DimensionError(f"image height and width must be divisible by 16, got {shape[2]}x{shape[3]}")


def encode(model, image):
    """Embed a (b, 3, H, W) image batch as a (b, 256, H/16, W/16) tensor."""
    if not isinstance(image, nx.Tensor):
        image = nx.Tensor(np.asarray(image, dtype=model.parameters()[0].dtype))
    check_image_shape(image.shape)
    out = model(image)
    if not np.all(np.isfinite(out.data)):
        raise NumericDomainError(f"{model.name} produced a non-finite embedding")
    return out


def embedding_shape(image_shape):
    b, _, h, w = image_shape
    return (b, EMBED_CHANNELS, h // OUTPUT_STRIDE, w // OUTPUT_STRIDE)
