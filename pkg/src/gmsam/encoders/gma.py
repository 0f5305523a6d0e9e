"""Group-Mix Attention block.

Channels are split into equal segments and each segment is summarised by a
depthwise "group aggregator" of its own kernel size before the Q/K/V
projections.  A kernel-1 segment keeps per-token features, larger kernels
turn each token into a descriptor of its neighbourhood, so attention between
the mixed descriptors covers token-token, token-group and group-group pairs.
"""
from __future__ import annotations

from math import prod, sqrt

import numpy as np

from gmsam import numerics as nx
from gmsam.encoders.layers import LayerNorm, Linear, Module, Conv2d, from_tokens, to_tokens
from gmsam.encoders.spec import GmaBlockConfig
from gmsam.errors import ConfigurationError, DimensionError, NumericDomainError


class GroupAggregator(Module):
    """Per-segment depthwise convolutions; kernel 1 is a learned channel scale.

    Kernels start as normalised box filters (a kernel-1 segment starts as the
    identity), so a freshly built aggregator averages rather than scrambles.
    """

    def __init__(self, dim, group_kernels):
        super().__init__()
        if dim % len(group_kernels):
            raise ConfigurationError(f"dim {dim} cannot be split into {len(group_kernels)} segments")
        self.dim = dim
        self.group_kernels = tuple(group_kernels)
        self.width = dim // len(group_kernels)
        dtype = nx.get_default_dtype()
        for i, k in enumerate(self.group_kernels):
            box = np.full((self.width, 1, k, k), 1.0 / (k * k), dtype=dtype)
            setattr(self, f"seg{i}", Conv2d(self.width, self.width, k, padding=k // 2,
                                            groups=self.width, bias=False, weight=box))

    @property
    def segments(self):
        return [getattr(self, f"seg{i}") for i in range(len(self.group_kernels))]

    def forward(self, x):
        if x.shape[1] != self.dim:
            raise DimensionError(f"group aggregator expects {self.dim} channels, got {x.shape}")
        if len(self.group_kernels) == 1:
            return self.seg0(x)
        parts = [conv(nx.narrow(x, 1, i * self.width, (i + 1) * self.width))
                 for i, conv in enumerate(self.segments)]
        return nx.concat(parts, axis=1)

    def flop_rows(self, shape, prefix=""):
        rows = []
        seg_shape = (shape[0], self.width, *shape[2:])
        for i, conv in enumerate(self.segments):
            r, _ = conv.flop_rows(seg_shape, f"{prefix}seg{i}.")
            rows += r
        return rows, shape


def group_aggregate(tokens, aggregator):
    """Apply ``aggregator`` to a (b, c, h, w) tensor; shape is preserved."""
    return aggregator(tokens)


def multi_head_attention(q, k, v, heads):
    """Scaled dot-product attention over the token axis.

    ``q``, ``k``, ``v`` are (b, n, c).  Returns the (b, n, c) output and the
    (b, heads, n, n) attention weights.
    """
    b, n, c = q.shape
    d = c // heads

    def split(t):
        return t.reshape(b, n, heads, d).permute(0, 2, 1, 3)

    qh, kh, vh = split(q), split(k), split(v)
    logits = nx.matmul(qh, kh.permute(0, 1, 3, 2)) * (1.0 / sqrt(d))
    weights = nx.softmax(logits, axis=-1)
    out = nx.matmul(weights, vh).permute(0, 2, 1, 3).reshape(b, n, c)
    return out, weights


def attention_flops(b, n, c, heads):
    # QK^T, scaling, softmax, AV
    return 2 * b * n * n * c + 2 * b * heads * n * n + 2 * b * n * n * c


class GroupMixAttention(Module):
    def __init__(self, config, rng):
        super().__init__()
        self.config = config
        self.aggregator = GroupAggregator(config.dim, config.group_kernels)
        self.qkv = Linear(config.dim, 3 * config.dim, rng)
        self.proj = Linear(config.dim, config.dim, rng)

    def forward(self, x, return_weights=False):
        b, c, h, w = x.shape
        mixed = to_tokens(self.aggregator(x))
        qkv = self.qkv(mixed)
        q, k, v = (nx.narrow(qkv, 2, i * c, (i + 1) * c) for i in range(3))
        out, weights = multi_head_attention(q, k, v, self.config.heads)
        out = self.proj(out)
        return (out, weights) if return_weights else out

    def flop_rows(self, shape, prefix=""):
        b, c, h, w = shape
        n = h * w
        rows, _ = self.aggregator.flop_rows(shape, prefix + "aggregator.")
        r, _ = self.qkv.flop_rows((b, n, c), prefix + "qkv.")
        rows += r
        rows.append((prefix + "attention", attention_flops(b, n, c, self.config.heads)))
        r, _ = self.proj.flop_rows((b, n, c), prefix + "proj.")
        rows += r
        return rows, (b, n, c)


class Mlp(Module):
    def __init__(self, dim, hidden, rng):
        super().__init__()
        self.fc1 = Linear(dim, hidden, rng)
        self.fc2 = Linear(hidden, dim, rng)

    def forward(self, x):
        return self.fc2(nx.gelu(self.fc1(x)))

    def flop_rows(self, shape, prefix=""):
        rows, s = self.fc1.flop_rows(shape, prefix + "fc1.")
        rows.append((prefix + "gelu", prod(s)))
        r, s = self.fc2.flop_rows(s, prefix + "fc2.")
        return rows + r, s


class GmaBlock(Module):
    """Pre-norm transformer block whose token mixer is Group-Mix Attention.

    With ``group_kernels == (1,)`` this is a plain multi-head self-attention
    block (the aggregator degenerates to a per-channel scale).
    """

    def __init__(self, config, rng):
        super().__init__()
        config.validate()
        self.config = config
        self.norm1 = LayerNorm(config.dim)
        self.attn = GroupMixAttention(config, rng)
        self.norm2 = LayerNorm(config.dim)
        self.mlp = Mlp(config.dim, int(round(config.dim * config.mlp_ratio)), rng)

    def forward(self, x):
        b, c, h, w = x.shape
        if c != self.config.dim:
            raise DimensionError(f"block expects {self.config.dim} channels, got {x.shape}")
        t = to_tokens(x)
        y = from_tokens(self.norm1(t), h, w)
        t = t + self.attn(y)
        t = t + self.mlp(self.norm2(t))
        if not np.all(np.isfinite(t.data)):
            raise NumericDomainError("non-finite activation in group-mix attention block")
        return from_tokens(t, h, w)

    def flop_rows(self, shape, prefix=""):
        b, c, h, w = shape
        tok = (b, h * w, c)
        rows, _ = self.norm1.flop_rows(tok, prefix + "norm1.")
        r, _ = self.attn.flop_rows(shape, prefix + "attn.")
        rows += r
        r, _ = self.norm2.flop_rows(tok, prefix + "norm2.")
        rows += r
        r, _ = self.mlp.flop_rows(tok, prefix + "mlp.")
        rows += r
        rows.append((prefix + "residual", 2 * prod(tok)))
        return rows, shape


def gma_attention(x, block):
    """Run one Group-Mix Attention block on (b, c, h, w) input."""
    if not np.all(np.isfinite(x.data)):
        raise NumericDomainError("gma_attention input contains non-finite values")
    return block(x)


def build_block(config: GmaBlockConfig, seed=0):
    return GmaBlock(config, np.random.default_rng(seed))
