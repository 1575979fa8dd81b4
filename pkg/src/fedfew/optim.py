"""SGD and Adam (bias-corrected, decoupled weight decay) over ParamVectors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .params import ParamVector
from .tensor import ShapeError


@dataclass
class OptimState:
    kind: str  # "sgd" | "adam"
    lr: float
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer kind {self.kind!r}")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")


def optimizer_step(params: ParamVector, grads: dict[str, np.ndarray], state: OptimState) -> None:
    """Apply one update in place; gradients are validated per parameter."""
    for name, p in params:
        if name not in grads:
            raise KeyError(f"missing gradient for parameter {name!r}")
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != p.values.shape:
            raise ShapeError(
                f"gradient shape {g.shape} does not match parameter {name!r} {p.values.shape}"
            )
        if not np.isfinite(g).all():
            raise FloatingPointError(f"non-finite gradient for parameter {name!r}")

    state.step_count += 1
    for name, p in params:
        g = np.asarray(grads[name], dtype=np.float64)
        if state.kind == "sgd":
            p.values = p.values - state.lr * g
            continue
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(p.values)
            v = np.zeros_like(p.values)
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        state.m[name] = m
        state.v[name] = v
        m_hat = m / (1.0 - state.beta1**state.step_count)
        v_hat = v / (1.0 - state.beta2**state.step_count)
        update = m_hat / (np.sqrt(v_hat) + state.eps)
        if state.weight_decay:
            update = update + state.weight_decay * p.values
        p.values = p.values - state.lr * update


def sgd_adapted(params: ParamVector, lr: float) -> ParamVector:
    """Return a one-step SGD copy ``p - lr * p.grad``; ``params`` is untouched."""
    from .tensor import Tensor

    return ParamVector((n, Tensor(p.values - lr * p.grad)) for n, p in params)
