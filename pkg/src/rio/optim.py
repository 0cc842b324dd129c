"""Adam optimizer over named parameter dicts.

Parameter sets are treated as immutable values: adam_step returns fresh
dicts, so snapshots taken before an update stay bitwise intact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch


@dataclass(frozen=True)
class AdamState:
    step: int
    first_moment: dict[str, np.ndarray]
    second_moment: dict[str, np.ndarray]
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_adam(params: dict[str, np.ndarray], lr: float = 1e-4, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    zeros = lambda: {k: np.zeros_like(v) for k, v in params.items()}
    return AdamState(0, zeros(), zeros(), lr, beta1, beta2, eps)


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              state: AdamState) -> tuple[dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update; returns (new params, new state).

    Update arithmetic runs in double precision and is cast back to each
    parameter's storage dtype.
    """
    t = state.step + 1
    new_params: dict[str, np.ndarray] = {}
    new_m: dict[str, np.ndarray] = {}
    new_v: dict[str, np.ndarray] = {}
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeMismatch(f"adam_step: gradient {g.shape} for parameter '{name}' {p.shape}")
        m = state.beta1 * state.first_moment[name].astype(np.float64) + (1 - state.beta1) * g.astype(np.float64)
        v = state.beta2 * state.second_moment[name].astype(np.float64) + (1 - state.beta2) * g.astype(np.float64) ** 2
        m_hat = m / (1 - state.beta1**t)
        v_hat = v / (1 - state.beta2**t)
        step = state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
        new_params[name] = (p.astype(np.float64) - step).astype(p.dtype)
        new_m[name] = m.astype(p.dtype)
        new_v[name] = v.astype(p.dtype)
    next_state = AdamState(t, new_m, new_v, state.lr, state.beta1, state.beta2, state.eps)
    return new_params, next_state
