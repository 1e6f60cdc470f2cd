from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .layers import Parameter


class TrainingError(RuntimeError):
    pass


def adam_step(params: Sequence[Parameter], lr: float, t: int, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> None:
    """Bias-corrected Adam update using each parameter's accumulated ``grad``.

    Raises TrainingError, leaving every parameter untouched, if any gradient
    is non-finite.
    """
    if t < 1:
        raise ValueError(f"step counter must be >= 1, got {t}")
    for p in params:
        if not np.all(np.isfinite(p.grad)):
            raise TrainingError(f"non-finite gradient in {p.name or 'parameter'} {p.shape}; step aborted")
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for p in params:
        p.m *= beta1
        p.m += (1.0 - beta1) * p.grad
        p.v *= beta2
        p.v += (1.0 - beta2) * p.grad * p.grad
        p.value -= lr * (p.m / c1) / (np.sqrt(p.v / c2) + eps)


class Adam:
    def __init__(self, params: Iterable[Parameter], lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self):
        adam_step(self.params, self.lr, self.t + 1, self.beta1, self.beta2, self.eps)
        self.t += 1
