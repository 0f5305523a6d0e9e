"""Adaptive-moment (Adam) parameter updates."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from gmsam.errors import DimensionError, TrainingDivergenceError


@dataclass
class OptimizerState:
    learning_rate: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    first_moment: dict = field(default_factory=dict)
    second_moment: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError(f"learning rate must be non-negative, got {self.learning_rate}")


def optimizer_step(params, grads, state):
    """Apply one bias-corrected Adam update in place.

    ``params`` and ``grads`` map parameter names to Tensors and arrays (a
    missing or ``None`` gradient counts as zero).  Returns ``(params, state)``.
    Every gradient is validated before any parameter is touched, so a
    divergence error leaves the model unchanged.
    """
    for name, g in grads.items():
        if name not in params:
            raise DimensionError(f"gradient for unknown parameter {name!r}")
        if g is not None and not np.all(np.isfinite(g)):
            raise TrainingDivergenceError(
                f"non-finite gradient for parameter {name!r} at step {state.step + 1}",
                step=state.step + 1,
                parameter=name,
            )
    state.step += 1
    t = state.step
    for name, p in params.items():
        g = grads.get(name)
        data = p.data
        dt = data.dtype.type
        if g is None:
            g = np.zeros_like(data)
        elif g.shape != data.shape:
            raise DimensionError(f"gradient {g.shape} does not match parameter {name!r} {data.shape}")
        m = state.first_moment.get(name)
        v = state.second_moment.get(name)
        if m is None:
            m = np.zeros_like(data)
            v = np.zeros_like(data)
        m = dt(state.beta1) * m + dt(1 - state.beta1) * g
        v = dt(state.beta2) * v + dt(1 - state.beta2) * (g * g)
        state.first_moment[name], state.second_moment[name] = m, v
        m_hat = m / dt(1 - state.beta1 ** t)
        v_hat = v / dt(1 - state.beta2 ** t)
        data -= dt(state.learning_rate) * m_hat / (np.sqrt(v_hat) + dt(state.epsilon))
    return params, state


class Adam:
    """Convenience wrapper binding a parameter dict to an :class:`OptimizerState`."""

    def __init__(self, params, lr=3e-4, betas=(0.9, 0.999), eps=1e-8):
        self.params = dict(params)
        self.state = OptimizerState(learning_rate=lr, beta1=betas[0], beta2=betas[1], epsilon=eps)

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def step(self):
        grads = {name: p.grad for name, p in self.params.items()}
        optimizer_step(self.params, grads, self.state)
