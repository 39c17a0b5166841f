"""Adamax optimizer (infinity-norm variant of Adam)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamaxState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)   # first moment per parameter
    u: dict = field(default_factory=dict)   # infinity-norm accumulator


def adamax_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
                state: AdamaxState) -> None:
    """One in-place Adamax update:

        m <- b1 m + (1-b1) g
        u <- max(b2 u, |g|)
        theta <- theta - lr / (1 - b1^t) * m / (u + eps)

    Raises on non-finite gradients without touching the parameters.
    """
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for {name!r}")
    state.t += 1
    correction = 1.0 - state.beta1 ** state.t
    for name, g in grads.items():
        theta = params[name]
        m = state.m.setdefault(name, np.zeros_like(theta))
        u = state.u.setdefault(name, np.zeros_like(theta))
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        np.maximum(state.beta2 * u, np.abs(g), out=u)
        theta -= (state.lr / correction) * m / (u + state.eps)
