"""Plain SGD with momentum. Frozen parameters are never touched."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .tensor import Tensor


class SGD:
    def __init__(self, params: Sequence[Tensor], lr: float, momentum: float = 0.9):
        self.params = list(params)
        self.lr = lr
        self.momentum = momentum
        self._velocity = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        for p, v in zip(self.params, self._velocity):
            if p.frozen or p.grad is None:
                continue
            v *= self.momentum
            v += p.grad
            p.data -= self.lr * v
