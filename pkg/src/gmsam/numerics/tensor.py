"""Numpy-backed tensor with dynamic reverse-mode differentiation.

Every differentiable operation is a :class:`Function` subclass with a numpy
``forward`` and ``backward``.  Applying one attaches a :class:`Node` to the
output tensor; ``Tensor.backward`` walks those nodes in reverse topological
order.  Two optional thread-local observers hook into ``Function.apply``:

* :func:`record` collects a :class:`ComputationRecord` (the op tape) that can be
  replayed forward to check determinism;
* :func:`count_flops` accumulates the FLOPs of every primitive executed, which
  is the instrumented-execution oracle used by the profiler tests.
"""
from __future__ import annotations

import contextlib
import threading
from dataclasses import dataclass, field
from math import prod

import numpy as np

from gmsam.errors import ConfigurationError, DimensionError, NumericDomainError

_DTYPES = {32: np.float32, 64: np.float64}
_default_dtype = np.float32
_local = threading.local()


def _observers(kind):
    stack = getattr(_local, kind, None)
    if stack is None:
        stack = []
        setattr(_local, kind, stack)
    return stack


def get_default_dtype():
    return _default_dtype


def set_default_dtype(bits):
    """Select 32-bit (training) or 64-bit (gradient checking) floats."""
    global _default_dtype
    if bits not in _DTYPES:
        raise ValueError(f"precision must be 32 or 64, got {bits!r}")
    _default_dtype = _DTYPES[bits]


@contextlib.contextmanager
def precision(bits):
    previous = _default_dtype
    set_default_dtype(bits)
    try:
        yield
    finally:
        globals()["_default_dtype"] = previous


def is_grad_enabled():
    return not getattr(_local, "no_grad", False)


@contextlib.contextmanager
def no_grad():
    previous = getattr(_local, "no_grad", False)
    _local.no_grad = True
    try:
        yield
    finally:
        _local.no_grad = previous


class Tensor:
    """An n-dimensional float array that can take part in differentiation."""

    __slots__ = ("data", "requires_grad", "grad", "_node", "name", "__weakref__")

    def __init__(self, data, requires_grad=False, dtype=None, name=None):
        if isinstance(data, Tensor):
            data = data.data
        if dtype is None:
            if isinstance(data, np.ndarray) and data.dtype in (np.float32, np.float64):
                dtype = data.dtype
            else:
                dtype = _default_dtype
        self.data = np.asarray(data, dtype=dtype, order="C")
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._node = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def strides(self):
        return self.data.strides

    def numpy(self):
        return self.data

    def item(self):
        return self.data.item()

    def detach(self):
        return Tensor(self.data, dtype=self.data.dtype)

    def astype(self, dtype):
        return Tensor(self.data.astype(dtype), requires_grad=self.requires_grad, name=self.name)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    def __len__(self):
        return self.shape[0]

    # -- differentiation -------------------------------------------------

    def backward(self, grad=None):
        """Accumulate d(self)/d(leaf) into ``.grad`` of every leaf tensor."""
        if grad is None:
            if self.size != 1:
                raise DimensionError(
                    f"backward() without a seed gradient needs a scalar, got shape {self.shape}"
                )
            grad = np.ones_like(self.data)
        grads = {id(self): np.asarray(grad, dtype=self.dtype)}
        for tensor in reversed(_topological_order(self)):
            g = grads.pop(id(tensor), None)
            if g is None:
                continue
            node = tensor._node
            if node is None:
                if tensor.requires_grad:
                    tensor.grad = g if tensor.grad is None else tensor.grad + g
                continue
            input_grads = node.fn.backward(node.ctx, g)
            for parent, pg in zip(node.inputs, input_grads):
                if pg is None or not parent.requires_grad:
                    continue
                if pg.shape != parent.shape:
                    raise DimensionError(
                        f"{node.fn.__name__} produced gradient {pg.shape} for input {parent.shape}"
                    )
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg

    # -- operator sugar --------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def permute(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return permute(self, axes)


def _topological_order(root):
    order, visited = [], set()
    stack = [(root, False)]
    while stack:
        tensor, expanded = stack.pop()
        if expanded:
            order.append(tensor)
            continue
        if id(tensor) in visited:
            continue
        visited.add(id(tensor))
        stack.append((tensor, True))
        if tensor._node is not None:
            for parent in tensor._node.inputs:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
    return order


@dataclass
class Node:
    fn: type
    inputs: tuple
    ctx: dict
    kwargs: dict


@dataclass
class RecordEntry:
    op: str
    fn: type
    inputs: tuple
    kwargs: dict
    output: np.ndarray


@dataclass
class ComputationRecord:
    """Ordered tape of the primitives applied while :func:`record` was active."""

    entries: list = field(default_factory=list)

    def __len__(self):
        return len(self.entries)

    @property
    def ops(self):
        return [e.op for e in self.entries]

    def replay(self):
        """Re-run every recorded primitive on its recorded inputs."""
        outputs = []
        for e in self.entries:
            outputs.append(e.fn.forward({}, *[t.data for t in e.inputs], **e.kwargs))
        return outputs

    def replay_matches(self):
        return all(
            out.dtype == e.output.dtype and np.array_equal(out, e.output)
            for out, e in zip(self.replay(), self.entries)
        )


@contextlib.contextmanager
def record():
    rec = ComputationRecord()
    stack = _observers("records")
    stack.append(rec)
    try:
        yield rec
    finally:
        stack.remove(rec)


class FlopCounter:
    def __init__(self):
        self.total = 0
        self.by_op = {}

    def add(self, op, flops):
        self.total += flops
        self.by_op[op] = self.by_op.get(op, 0) + flops


@contextlib.contextmanager
def count_flops():
    """Count the FLOPs of every primitive executed inside the block."""
    counter = FlopCounter()
    stack = _observers("counters")
    stack.append(counter)
    try:
        yield counter
    finally:
        stack.remove(counter)


class Function:
    """A differentiable primitive.

    Subclasses implement ``forward(ctx, *arrays, **kwargs)`` returning an array,
    ``backward(ctx, grad)`` returning one gradient (or None) per input, and
    ``flops(inputs, output, **kwargs)``.
    """

    @staticmethod
    def flops(inputs, out, **kwargs):
        return out.size

    @classmethod
    def apply(cls, *inputs, **kwargs):
        dtype = next((t.dtype for t in inputs if isinstance(t, Tensor)), _default_dtype)
        tensors = tuple(t if isinstance(t, Tensor) else Tensor(np.asarray(t, dtype=dtype)) for t in inputs)
        ctx = {}
        out = cls.forward(ctx, *[t.data for t in tensors], **kwargs)
        for counter in _observers("counters"):
            counter.add(cls.__name__, int(cls.flops([t.data for t in tensors], out, **kwargs)))
        for rec in _observers("records"):
            rec.entries.append(RecordEntry(cls.__name__, cls, tensors, kwargs, out))
        result = Tensor(out, dtype=out.dtype)
        if is_grad_enabled() and any(t.requires_grad for t in tensors):
            result.requires_grad = True
            result._node = Node(cls, tensors, ctx, kwargs)
        return result


def _unbroadcast(grad, shape):
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


# -- elementwise -------------------------------------------------------------


class Add(Function):
    @staticmethod
    def forward(ctx, a, b):
        ctx["shapes"] = a.shape, b.shape
        return a + b

    @staticmethod
    def backward(ctx, g):
        sa, sb = ctx["shapes"]
        return _unbroadcast(g, sa), _unbroadcast(g, sb)


class Sub(Function):
    @staticmethod
    def forward(ctx, a, b):
        ctx["shapes"] = a.shape, b.shape
        return a - b

    @staticmethod
    def backward(ctx, g):
        sa, sb = ctx["shapes"]
        return _unbroadcast(g, sa), _unbroadcast(-g, sb)


class Mul(Function):
    @staticmethod
    def forward(ctx, a, b):
        ctx["a"], ctx["b"] = a, b
        return a * b

    @staticmethod
    def backward(ctx, g):
        a, b = ctx["a"], ctx["b"]
        return _unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)


class Div(Function):
    @staticmethod
    def forward(ctx, a, b):
        ctx["a"], ctx["b"] = a, b
        return a / b

    @staticmethod
    def backward(ctx, g):
        a, b = ctx["a"], ctx["b"]
        return _unbroadcast(g / b, a.shape), _unbroadcast(-g * a / (b * b), b.shape)


class Neg(Function):
    @staticmethod
    def forward(ctx, a):
        return -a

    @staticmethod
    def backward(ctx, g):
        return (-g,)


class Relu(Function):
    @staticmethod
    def forward(ctx, a):
        ctx["mask"] = a > 0
        return np.where(ctx["mask"], a, 0).astype(a.dtype)

    @staticmethod
    def backward(ctx, g):
        return (g * ctx["mask"],)


_GELU_C = np.sqrt(2.0 / np.pi)


class Gelu(Function):
    """GELU, tanh approximation."""

    @staticmethod
    def forward(ctx, a):
        c = a.dtype.type(_GELU_C)
        inner = c * (a + a.dtype.type(0.044715) * a ** 3)
        t = np.tanh(inner)
        ctx["a"], ctx["t"] = a, t
        return a.dtype.type(0.5) * a * (1 + t)

    @staticmethod
    def backward(ctx, g):
        a, t = ctx["a"], ctx["t"]
        c = a.dtype.type(_GELU_C)
        dinner = c * (1 + a.dtype.type(3 * 0.044715) * a * a)
        d = a.dtype.type(0.5) * (1 + t) + a.dtype.type(0.5) * a * (1 - t * t) * dinner
        return (g * d,)


# -- linear algebra ----------------------------------------------------------


class MatMul(Function):
    @staticmethod
    def forward(ctx, a, b):
        if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
            raise DimensionError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
        ctx["a"], ctx["b"] = a, b
        return np.matmul(a, b)

    @staticmethod
    def backward(ctx, g):
        a, b = ctx["a"], ctx["b"]
        ga = np.matmul(g, np.swapaxes(b, -1, -2))
        gb = np.matmul(np.swapaxes(a, -1, -2), g)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    @staticmethod
    def flops(inputs, out, **kwargs):
        k = inputs[0].shape[-1]
        return 2 * out.size * k


def _conv_out(size, k, stride, padding):
    return (size + 2 * padding - k) // stride + 1


class Conv2d(Function):
    """Grouped 2-D cross-correlation, optional bias as third input."""

    @staticmethod
    def forward(ctx, x, w, *bias, stride=1, padding=0, groups=1):
        if x.ndim != 4 or w.ndim != 4:
            raise DimensionError(f"conv2d expects 4-d input and kernel, got {x.shape} and {w.shape}")
        B, C, H, W = x.shape
        O, Cg, kh, kw = w.shape
        if C % groups or O % groups:
            raise ConfigurationError(
                f"conv2d: channels in={C} out={O} must both be divisible by groups={groups}"
            )
        if Cg != C // groups:
            raise DimensionError(f"conv2d: kernel {w.shape} expects {Cg * groups} input channels, got {C}")
        if H + 2 * padding < kh or W + 2 * padding < kw:
            raise DimensionError(f"conv2d: kernel {kh}x{kw} larger than padded input {H}x{W}")
        oh, ow = _conv_out(H, kh, stride, padding), _conv_out(W, kw, stride, padding)
        xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x
        ctx.update(xshape=x.shape, w=w, stride=stride, padding=padding, groups=groups, oh=oh, ow=ow)
        depthwise = Cg == 1 and O == C
        ctx["depthwise"] = depthwise
        if depthwise:
            ctx["xp"] = xp
            out = np.zeros((B, O, oh, ow), dtype=x.dtype)
            for i in range(kh):
                for j in range(kw):
                    win = xp[:, :, i : i + stride * (oh - 1) + 1 : stride, j : j + stride * (ow - 1) + 1 : stride]
                    out += win * w[:, 0, i, j][None, :, None, None]
        else:
            G, Og = groups, O // groups
            win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
            win = win[:, :, :oh, :ow].reshape(B, G, Cg, oh, ow, kh, kw)
            cols = win.transpose(1, 0, 3, 4, 2, 5, 6).reshape(G, B * oh * ow, Cg * kh * kw)
            wmat = w.reshape(G, Og, Cg * kh * kw)
            ctx["cols"], ctx["wmat"] = cols, wmat
            out = np.matmul(cols, wmat.transpose(0, 2, 1))
            out = out.reshape(G, B, oh, ow, Og).transpose(1, 0, 4, 2, 3).reshape(B, O, oh, ow)
        if bias:
            out = out + bias[0][None, :, None, None]
        ctx["has_bias"] = bool(bias)
        return np.ascontiguousarray(out)

    @staticmethod
    def backward(ctx, g):
        B, C, H, W = ctx["xshape"]
        w, s, p, G = ctx["w"], ctx["stride"], ctx["padding"], ctx["groups"]
        oh, ow = ctx["oh"], ctx["ow"]
        O, Cg, kh, kw = w.shape
        gxp = np.zeros((B, C, H + 2 * p, W + 2 * p), dtype=g.dtype)
        if ctx["depthwise"]:
            xp = ctx["xp"]
            gw = np.zeros_like(w)
            for i in range(kh):
                for j in range(kw):
                    sl = (slice(None), slice(None), slice(i, i + s * (oh - 1) + 1, s), slice(j, j + s * (ow - 1) + 1, s))
                    gw[:, 0, i, j] = (g * xp[sl]).sum(axis=(0, 2, 3))
                    gxp[sl] += g * w[:, 0, i, j][None, :, None, None]
        else:
            Og = O // G
            go = g.reshape(B, G, Og, oh, ow).transpose(1, 0, 3, 4, 2).reshape(G, B * oh * ow, Og)
            gw = np.matmul(go.transpose(0, 2, 1), ctx["cols"]).reshape(w.shape)
            gcols = np.matmul(go, ctx["wmat"]).reshape(G, B, oh, ow, Cg, kh, kw)
            gcols = gcols.transpose(1, 0, 4, 5, 6, 2, 3).reshape(B, C, kh, kw, oh, ow)
            for i in range(kh):
                for j in range(kw):
                    gxp[:, :, i : i + s * (oh - 1) + 1 : s, j : j + s * (ow - 1) + 1 : s] += gcols[:, :, i, j]
        gx = gxp[:, :, p : p + H, p : p + W] if p else gxp
        grads = [np.ascontiguousarray(gx), gw]
        if ctx["has_bias"]:
            grads.append(g.sum(axis=(0, 2, 3)))
        return tuple(grads)

    @staticmethod
    def flops(inputs, out, stride=1, padding=0, groups=1):
        w = inputs[1]
        n = 2 * out.size * w.shape[1] * w.shape[2] * w.shape[3]
        if len(inputs) > 2:
            n += out.size
        return n


# -- shape manipulation (zero FLOPs) ----------------------------------------


class Reshape(Function):
    @staticmethod
    def forward(ctx, a, shape=None):
        if prod(shape) != a.size:
            raise DimensionError(f"cannot reshape {a.shape} into {shape}")
        ctx["shape"] = a.shape
        return a.reshape(shape)

    @staticmethod
    def backward(ctx, g):
        return (g.reshape(ctx["shape"]),)

    @staticmethod
    def flops(inputs, out, **kwargs):
        return 0


class Permute(Function):
    @staticmethod
    def forward(ctx, a, axes=None):
        ctx["axes"] = axes
        return np.ascontiguousarray(a.transpose(axes))

    @staticmethod
    def backward(ctx, g):
        return (np.ascontiguousarray(g.transpose(np.argsort(ctx["axes"]))),)

    @staticmethod
    def flops(inputs, out, **kwargs):
        return 0


class Concat(Function):
    @staticmethod
    def forward(ctx, *arrays, axis=0):
        ctx["sizes"] = [a.shape[axis] for a in arrays]
        ctx["axis"] = axis
        return np.concatenate(arrays, axis=axis)

    @staticmethod
    def backward(ctx, g):
        bounds = np.cumsum(ctx["sizes"])[:-1]
        return tuple(np.ascontiguousarray(p) for p in np.split(g, bounds, axis=ctx["axis"]))

    @staticmethod
    def flops(inputs, out, **kwargs):
        return 0


class Narrow(Function):
    """Slice ``[start, stop)`` along one axis."""

    @staticmethod
    def forward(ctx, a, axis=0, start=0, stop=None):
        ctx.update(shape=a.shape, axis=axis, start=start, stop=stop)
        index = [slice(None)] * a.ndim
        index[axis] = slice(start, stop)
        return np.ascontiguousarray(a[tuple(index)])

    @staticmethod
    def backward(ctx, g):
        full = np.zeros(ctx["shape"], dtype=g.dtype)
        index = [slice(None)] * len(ctx["shape"])
        index[ctx["axis"]] = slice(ctx["start"], ctx["stop"])
        full[tuple(index)] = g
        return (full,)

    @staticmethod
    def flops(inputs, out, **kwargs):
        return 0


# -- reductions and normalisation -------------------------------------------


class Sum(Function):
    @staticmethod
    def forward(ctx, a, axis=None, keepdims=False):
        ctx.update(shape=a.shape, axis=axis, keepdims=keepdims)
        return np.asarray(a.sum(axis=axis, keepdims=keepdims))

    @staticmethod
    def backward(ctx, g):
        shape, axis = ctx["shape"], ctx["axis"]
        if axis is not None and not ctx["keepdims"]:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    @staticmethod
    def flops(inputs, out, **kwargs):
        return inputs[0].size


class Mean(Function):
    @staticmethod
    def forward(ctx, a, axis=None, keepdims=False):
        ctx.update(shape=a.shape, axis=axis, keepdims=keepdims)
        out = np.asarray(a.mean(axis=axis, keepdims=keepdims))
        ctx["count"] = a.size // max(out.size, 1)
        return out

    @staticmethod
    def backward(ctx, g):
        shape, axis = ctx["shape"], ctx["axis"]
        if axis is not None and not ctx["keepdims"]:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / g.dtype.type(ctx["count"]), shape).copy(),)

    @staticmethod
    def flops(inputs, out, **kwargs):
        return inputs[0].size


class Softmax(Function):
    @staticmethod
    def forward(ctx, a, axis=-1):
        if not np.all(np.isfinite(a)):
            raise NumericDomainError("softmax received non-finite input")
        e = np.exp(a - a.max(axis=axis, keepdims=True))
        y = e / e.sum(axis=axis, keepdims=True)
        ctx["y"], ctx["axis"] = y, axis
        return y

    @staticmethod
    def backward(ctx, g):
        y, axis = ctx["y"], ctx["axis"]
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)


class LayerNorm(Function):
    """Normalise over the last axis, then scale and shift."""

    @staticmethod
    def forward(ctx, x, weight, bias, eps=1e-6):
        mu = x.mean(axis=-1, keepdims=True)
        xc = x - mu
        rstd = 1 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + x.dtype.type(eps))
        xhat = xc * rstd
        ctx["xhat"], ctx["rstd"], ctx["weight"] = xhat, rstd, weight
        return xhat * weight + bias

    @staticmethod
    def backward(ctx, g):
        xhat, rstd, weight = ctx["xhat"], ctx["rstd"], ctx["weight"]
        lead = tuple(range(g.ndim - 1))
        gw = (g * xhat).sum(axis=lead)
        gb = g.sum(axis=lead)
        dxhat = g * weight
        gx = rstd * (
            dxhat - dxhat.mean(axis=-1, keepdims=True) - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
        )
        return gx, gw, gb


class HuberLoss(Function):
    @staticmethod
    def forward(ctx, pred, target, delta=1.0):
        if pred.shape != target.shape:
            raise DimensionError(f"huber_loss: prediction {pred.shape} vs target {target.shape}")
        r = pred - target
        a = np.abs(r)
        d = pred.dtype.type(delta)
        per = np.where(a <= d, pred.dtype.type(0.5) * r * r, d * (a - pred.dtype.type(0.5) * d))
        ctx["r"], ctx["delta"] = r, d
        return np.asarray(per.mean(), dtype=pred.dtype)

    @staticmethod
    def backward(ctx, g):
        r, d = ctx["r"], ctx["delta"]
        gp = g * np.clip(r, -d, d) / r.dtype.type(r.size)
        return gp, -gp


# -- functional API ----------------------------------------------------------


def tensor(data, requires_grad=False, dtype=None, name=None):
    return Tensor(data, requires_grad=requires_grad, dtype=dtype, name=name)


def add(a, b):
    return Add.apply(a, b)


def sub(a, b):
    return Sub.apply(a, b)


def mul(a, b):
    return Mul.apply(a, b)


def div(a, b):
    return Div.apply(a, b)


def neg(a):
    return Neg.apply(a)


def relu(a):
    return Relu.apply(a)


def gelu(a):
    return Gelu.apply(a)


def matmul(a, b):
    return MatMul.apply(a, b)


def conv2d(x, weight, bias=None, stride=1, padding=0, groups=1):
    inputs = (x, weight) if bias is None else (x, weight, bias)
    return Conv2d.apply(*inputs, stride=stride, padding=padding, groups=groups)


def reshape(a, shape):
    return Reshape.apply(a, shape=tuple(shape))


def permute(a, axes):
    return Permute.apply(a, axes=tuple(axes))


def concat(tensors, axis=0):
    return Concat.apply(*tensors, axis=axis)


def narrow(a, axis, start, stop):
    return Narrow.apply(a, axis=axis, start=start, stop=stop)


def tsum(a, axis=None, keepdims=False):
    return Sum.apply(a, axis=axis, keepdims=keepdims)


def mean(a, axis=None, keepdims=False):
    return Mean.apply(a, axis=axis, keepdims=keepdims)


def softmax(x, axis=-1):
    return Softmax.apply(x, axis=axis)


def layer_norm(x, weight, bias, eps=1e-6):
    return LayerNorm.apply(x, weight, bias, eps=eps)


def huber_loss(pred, target, delta=1.0):
    """Mean elementwise Huber loss; quadratic inside ``|r| <= delta``."""
    if delta <= 0:
        raise ValueError(f"huber delta must be positive, got {delta}")
    return HuberLoss.apply(pred, target, delta=float(delta))


PRIMITIVES = (
    Add, Sub, Mul, Div, Neg, Relu, Gelu, MatMul, Conv2d, Reshape, Permute,
    Concat, Narrow, Sum, Mean, Softmax, LayerNorm, HuberLoss,
)
