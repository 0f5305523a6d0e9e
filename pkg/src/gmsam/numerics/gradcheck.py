"""Finite-difference validation of reverse-mode gradients."""
from __future__ import annotations

import numpy as np

from gmsam.numerics.tensor import Tensor


def numeric_gradient(f, tensors, step=1e-5):
    grads = []
    for t in tensors:
        g = np.zeros_like(t.data)
        flat, gflat = t.data.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            hi = float(f().data)
            flat[i] = orig - step
            lo = float(f().data)
            flat[i] = orig
            gflat[i] = (hi - lo) / (2 * step)
        grads.append(g)
    return grads


def gradient_check(f, inputs, wrt=(), step=1e-5):
    """Max relative error between reverse-mode and central-difference gradients.

    ``f`` maps the ``inputs`` tensors to a scalar tensor.  Gradients are taken
    with respect to ``inputs`` plus any extra tensors in ``wrt`` (for example
    module parameters closed over by ``f``).  The error per element is
    ``|analytic - numeric| / max(1, |numeric|)``.
    """
    inputs = [t if isinstance(t, Tensor) else Tensor(np.asarray(t, dtype=np.float64)) for t in inputs]
    targets = inputs + [t for t in wrt if all(t is not i for i in inputs)]
    for t in targets:
        if t.dtype != np.float64:
            raise TypeError(f"gradient_check needs 64-bit tensors, got {t.dtype}")
        t.requires_grad = True
        t.grad = None
    out = f(*inputs)
    out.backward()
    analytic = [t.grad if t.grad is not None else np.zeros_like(t.data) for t in targets]
    numeric = numeric_gradient(lambda: f(*inputs), targets, step)
    worst = 0.0
    for a, n in zip(analytic, numeric):
        if a.size:
            worst = max(worst, float(np.max(np.abs(a - n) / np.maximum(1.0, np.abs(n)))))
    return worst
