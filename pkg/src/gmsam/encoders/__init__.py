"""Teacher, student and baseline image encoders with a shared stride-16 output."""
from gmsam.encoders.gma import (
    GmaBlock,
    GroupAggregator,
    GroupMixAttention,
    build_block,
    gma_attention,
    group_aggregate,
    multi_head_attention,
)
from gmsam.encoders.layers import Conv2d, LayerNorm, LayerNorm2d, Linear, Module, Parameter, Sequential
from gmsam.encoders.models import (
    EncoderModel,
    GmfStudent,
    ResnetBaseline,
    VitTeacher,
    build_encoder,
    embedding_shape,
    encode,
)
from gmsam.encoders.spec import (
    TABLE2_STRUCTURES,
    EncoderSpec,
    GmaBlockConfig,
    StageSpec,
    dumps,
    load_spec,
    loads,
    save_spec,
    toy_baseline,
    toy_student,
    toy_teacher,
)

__all__ = [
    "TABLE2_STRUCTURES", "Conv2d", "EncoderModel", "EncoderSpec", "GmaBlock", "GmaBlockConfig",
    "GmfStudent", "GroupAggregator", "GroupMixAttention", "LayerNorm", "LayerNorm2d", "Linear",
    "Module", "Parameter", "ResnetBaseline", "Sequential", "StageSpec", "VitTeacher", "build_block",
    "build_encoder", "dumps", "embedding_shape", "encode", "gma_attention", "group_aggregate",
    "load_spec", "loads", "multi_head_attention", "save_spec", "toy_baseline", "toy_student",
    "toy_teacher",
]
