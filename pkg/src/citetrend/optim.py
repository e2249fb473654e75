"""Adam optimizer with classic (gradient-augmentation) L2 weight decay.

Decay is added to the raw gradient before the moment updates, the
pre-decoupling convention: g <- g + weight_decay * param.  Bias-corrected
first and second moments, epsilon outside the square root.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .autodiff import Tensor


class AdamState:
    """Per-parameter moment buffers plus hyperparameters and step count."""

    def __init__(self, params: Sequence[Tensor], learning_rate: float,
                 weight_decay: float = 0.0, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        if learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {learning_rate}")
        if weight_decay < 0:
            raise ValueError(f"weight_decay must be nonnegative, got {weight_decay}")
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]


def adam_step(state: AdamState, params: Sequence[Tensor]) -> None:
    """One Adam update over params in place; grads are zeroed afterward.

    Parameters with no gradient buffer are treated as zero-gradient (decay
    still applies to them).
    """
    if len(params) != len(state.m):
        raise ValueError(
            f"state built for {len(state.m)} params, got {len(params)}")
    state.t += 1
    correction1 = 1.0 - state.beta1 ** state.t
    correction2 = 1.0 - state.beta2 ** state.t
    for p, m, v in zip(params, state.m, state.v):
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        if state.weight_decay:
            g = g + state.weight_decay * p.data
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        m_hat = m / correction1
        v_hat = v / correction2
        p.data -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
        p.zero_grad()
