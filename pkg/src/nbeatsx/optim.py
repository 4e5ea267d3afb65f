"""Weight initialization strategies and the ADAM optimizer."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeMismatchError
from .tensor import Tensor

INIT_STRATEGIES = ("orthogonal", "he_norm", "glorot_norm")


def init_weights(strategy: str, shape, rng: np.random.Generator) -> Tensor:
    """Draw a weight tensor. fan_in/fan_out follow the x @ W layout: (in, out)."""
    shape = tuple(int(s) for s in shape)
    if strategy == "glorot_norm":
        fan_in, fan_out = shape[0], shape[-1]
        std = np.sqrt(2.0 / (fan_in + fan_out))
        return Tensor(rng.normal(0.0, std, size=shape))
    if strategy == "he_norm":
        std = np.sqrt(2.0 / shape[0])
        return Tensor(rng.normal(0.0, std, size=shape))
    if strategy == "orthogonal":
        if len(shape) != 2:
            raise ShapeMismatchError(
                f"orthogonal init requires a 2D shape, got {shape}")
        rows, cols = shape
        a = rng.normal(size=(max(rows, cols), min(rows, cols)))
        q, r = np.linalg.qr(a)
        q = q * np.sign(np.diag(r))  # fix the sign convention so diag(R) >= 0
        if rows < cols:
            q = q.T
        return Tensor(q[:rows, :cols].copy())
    raise ValueError(f"unknown init strategy {strategy!r}")


@dataclass
class AdamState:
    """First/second moment accumulators per parameter plus a step counter."""

    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    @classmethod
    def for_params(cls, params: dict[str, Tensor]) -> "AdamState":
        return cls(
            m={k: np.zeros_like(t.data) for k, t in params.items()},
            v={k: np.zeros_like(t.data) for k, t in params.items()},
            step=0,
        )


def adam_step(params: dict[str, Tensor], grads: dict[str, np.ndarray],
              state: AdamState, lr: float, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> None:
    """Standard bias-corrected ADAM update, applied in place."""
    if lr <= 0:
        raise ValueError(f"adam_step: lr must be positive, got {lr}")
    state.step += 1
    t = state.step
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.data.shape:
            raise ShapeMismatchError(
                f"adam_step: grad shape {g.shape} != param shape {p.data.shape} for {name!r}")
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
