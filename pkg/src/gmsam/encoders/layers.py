"""Module container and the leaf layers encoders are assembled from.

Each layer knows its own cost in closed form: ``param_count()`` and
``flop_rows(input_shape)``.  The profiler sums those; the tests check them
against an inventory walk and an instrumented forward pass.
"""
from __future__ import annotations

from math import prod

import numpy as np

from gmsam import numerics as nx
from gmsam.errors import DimensionError


def trunc_normal(rng, shape, std=0.02, dtype=None):
    """Normal(0, std) samples redrawn until they fall within two std."""
    out = rng.normal(0.0, std, size=shape)
    bad = np.abs(out) > 2 * std
    while bad.any():
        out[bad] = rng.normal(0.0, std, size=int(bad.sum()))
        bad = np.abs(out) > 2 * std
    return out.astype(dtype or nx.get_default_dtype())


class Parameter(nx.Tensor):
    __slots__ = ()

    def __init__(self, data, dtype=None):
        super().__init__(data, requires_grad=True, dtype=dtype or nx.get_default_dtype())


class Module:
    """Minimal module tree: attributes that are Parameters or Modules register in order."""

    def __init__(self):
        object.__setattr__(self, "_params", {})
        object.__setattr__(self, "_children", {})

    def __setattr__(self, key, value):
        if isinstance(value, Parameter):
            self._params[key] = value
        elif isinstance(value, Module):
            self._children[key] = value
        object.__setattr__(self, key, value)

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def named_parameters(self, prefix=""):
        for name, p in self._params.items():
            yield prefix + name, p
        for name, child in self._children.items():
            yield from child.named_parameters(f"{prefix}{name}.")

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def named_modules(self, prefix=""):
        yield prefix.rstrip("."), self
        for name, child in self._children.items():
            yield from child.named_modules(f"{prefix}{name}.")

    def parameter_inventory(self):
        return [(name, tuple(p.shape)) for name, p in self.named_parameters()]

    def state_dict(self):
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state):
        own = dict(self.named_parameters())
        missing = sorted(set(own) - set(state))
        unexpected = sorted(set(state) - set(own))
        if missing or unexpected:
            raise DimensionError(f"state mismatch: missing {missing}, unexpected {unexpected}")
        for name, p in own.items():
            value = np.asarray(state[name])
            if value.shape != p.shape:
                raise DimensionError(f"parameter {name!r}: expected {p.shape}, got {value.shape}")
            p.data = np.ascontiguousarray(value, dtype=value.dtype)
        return self

    def astype(self, dtype):
        for p in self.parameters():
            p.data = p.data.astype(dtype)
        return self

    def requires_grad_(self, flag=True):
        for p in self.parameters():
            p.requires_grad = flag
        return self

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def param_count(self):
        """Closed-form parameter count (leaf layers override; containers sum)."""
        return sum(child.param_count() for child in self._children.values())

    def flop_rows(self, shape, prefix=""):
        raise NotImplementedError


class Sequential(Module):
    def __init__(self, *modules):
        super().__init__()
        for i, m in enumerate(modules):
            setattr(self, str(i), m)

    def __iter__(self):
        return iter(self._children.values())

    def __len__(self):
        return len(self._children)

    def __getitem__(self, i):
        return list(self._children.values())[i]

    def forward(self, x):
        for m in self:
            x = m(x)
        return x

    def flop_rows(self, shape, prefix=""):
        rows = []
        for name, m in self._children.items():
            r, shape = m.flop_rows(shape, f"{prefix}{name}.")
            rows += r
        return rows, shape


class Linear(Module):
    """``y = x @ W + b`` on the last axis; ``W`` is stored (in, out)."""

    def __init__(self, in_features, out_features, rng, bias=True):
        super().__init__()
        self.in_features, self.out_features = in_features, out_features
        self.weight = Parameter(trunc_normal(rng, (in_features, out_features)))
        self.bias = Parameter(np.zeros(out_features)) if bias else None

    def forward(self, x):
        lead = x.shape[:-1]
        y = nx.matmul(x.reshape(prod(lead), self.in_features), self.weight)
        if self.bias is not None:
            y = y + self.bias
        return y.reshape(*lead, self.out_features)

    def param_count(self):
        return self.in_features * self.out_features + (self.out_features if self.bias is not None else 0)

    def flop_rows(self, shape, prefix=""):
        if shape[-1] != self.in_features:
            raise DimensionError(f"{prefix}: expected last dim {self.in_features}, got {shape}")
        rows_n = prod(shape[:-1])
        flops = 2 * rows_n * self.in_features * self.out_features
        if self.bias is not None:
            flops += rows_n * self.out_features
        return [(prefix.rstrip("."), flops)], (*shape[:-1], self.out_features)


class Conv2d(Module):
    def __init__(self, in_ch, out_ch, kernel, rng=None, stride=1, padding=0, groups=1, bias=True, weight=None):
        super().__init__()
        self.in_ch, self.out_ch, self.kernel = in_ch, out_ch, kernel
        self.stride, self.padding, self.groups = stride, padding, groups
        if weight is None:
            weight = trunc_normal(rng, (out_ch, in_ch // groups, kernel, kernel))
        self.weight = Parameter(weight)
        self.bias = Parameter(np.zeros(out_ch)) if bias else None

    def forward(self, x):
        return nx.conv2d(x, self.weight, self.bias, stride=self.stride, padding=self.padding, groups=self.groups)

    def param_count(self):
        n = self.out_ch * (self.in_ch // self.groups) * self.kernel * self.kernel
        return n + (self.out_ch if self.bias is not None else 0)

    def output_shape(self, shape):
        b, c, h, w = shape
        if c != self.in_ch:
            raise DimensionError(f"conv expects {self.in_ch} channels, got input shape {shape}")
        k, s, p = self.kernel, self.stride, self.padding
        return (b, self.out_ch, (h + 2 * p - k) // s + 1, (w + 2 * p - k) // s + 1)

    def flop_rows(self, shape, prefix=""):
        out = self.output_shape(shape)
        n = prod(out)
        flops = 2 * n * (self.in_ch // self.groups) * self.kernel * self.kernel
        if self.bias is not None:
            flops += n
        return [(prefix.rstrip("."), flops)], out


class LayerNorm(Module):
    """Normalisation over the last axis."""

    def __init__(self, dim, eps=1e-6):
        super().__init__()
        self.dim, self.eps = dim, eps
        self.weight = Parameter(np.ones(dim))
        self.bias = Parameter(np.zeros(dim))

    def forward(self, x):
        return nx.layer_norm(x, self.weight, self.bias, eps=self.eps)

    def param_count(self):
        return 2 * self.dim

    def flop_rows(self, shape, prefix=""):
        return [(prefix.rstrip("."), prod(shape))], shape


class LayerNorm2d(LayerNorm):
    """Channel normalisation applied independently at every spatial position."""

    def forward(self, x):
        y = nx.layer_norm(x.permute(0, 2, 3, 1), self.weight, self.bias, eps=self.eps)
        return y.permute(0, 3, 1, 2)


def to_tokens(x):
    """(b, c, h, w) -> (b, h*w, c)."""
    b, c, h, w = x.shape
    return x.permute(0, 2, 3, 1).reshape(b, h * w, c)


def from_tokens(t, h, w):
    """(b, h*w, c) -> (b, c, h, w)."""
    b, n, c = t.shape
    return t.reshape(b, h, w, c).permute(0, 3, 1, 2)
