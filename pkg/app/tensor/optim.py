"""Adam optimizer over lists of Matrix parameters."""

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from app.errors import ShapeError
from app.tensor.matrix import Matrix

BETA1 = 0.9
BETA2 = 0.999
EPSILON = 1e-8
DEFAULT_LR = 1e-3


@dataclass
class AdamState:
    step: int = 0
    m: List[np.ndarray] = field(default_factory=list)
    v: List[np.ndarray] = field(default_factory=list)

    @classmethod
    def zeros_like(cls, params: Sequence[Matrix]) -> "AdamState":
        return cls(0, [np.zeros(p.shape) for p in params], [np.zeros(p.shape) for p in params])


def adam_step(
    params: Sequence[Matrix],
    grads: Sequence[np.ndarray],
    state: AdamState,
    lr: float = DEFAULT_LR,
    beta1: float = BETA1,
    beta2: float = BETA2,
    eps: float = EPSILON,
) -> Tuple[List[Matrix], AdamState]:
    """
    One bias-corrected Adam update.

    Returns:
        (new parameters, new state); inputs are left untouched
    """
    if lr < 0:
        raise ValueError(f"learning rate must be non-negative, got {lr}")
    if not state.m:
        state = AdamState.zeros_like(params)
    if not (len(params) == len(grads) == len(state.m) == len(state.v)):
        raise ShapeError("adam_step: params, grads and state lengths differ")

    t = state.step + 1
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        g = np.asarray(g, dtype=np.float64)
        if g.shape != p.shape or m.shape != p.shape:
            raise ShapeError(f"adam_step: gradient {g.shape} does not match parameter {p.shape}")
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1 ** t)
        v_hat = v / (1.0 - beta2 ** t)
        new_params.append(Matrix._from_array(p.data - lr * m_hat / (np.sqrt(v_hat) + eps)))
        new_m.append(m)
        new_v.append(v)
    return new_params, AdamState(t, new_m, new_v)


class Adam:
    """
    Stateful wrapper around adam_step.

    Usage:
        opt = Adam(lr=1e-3)
        params = opt.step(params, grads)
    """

    def __init__(self, lr: float = DEFAULT_LR, beta1: float = BETA1, beta2: float = BETA2, eps: float = EPSILON):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.state = AdamState()

    def step(self, params: Sequence[Matrix], grads: Sequence[np.ndarray]) -> List[Matrix]:
        new_params, self.state = adam_step(params, grads, self.state, self.lr, self.beta1, self.beta2, self.eps)
        return new_params
