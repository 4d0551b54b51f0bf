"""Finite-difference verification of analytic gradients."""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor


class NonFiniteLossError(RuntimeError):
    """The loss evaluated to NaN/Inf during training or gradient checking."""


def grad_check(
    f: Callable[[], Tensor],
    params: Sequence[Tensor],
    h: float = 1e-5,
    entries_per_param: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Compare analytic gradients of the scalar graph f() against central differences.

    Returns the max over checked entries of
    |g_fd - g_an| / max(1, |g_fd| + |g_an|).

    f must rebuild its graph on every call and read the current values of
    `params`. With `entries_per_param` set, a deterministic random subset of
    each parameter's entries is checked (full check otherwise).
    """
    for p in params:
        p.zero_grad()
    loss = f()
    if not math.isfinite(loss.item()):
        raise NonFiniteLossError(f"loss is non-finite at the base point: {loss.item()}")
    loss.backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]

    if rng is None:
        rng = np.random.default_rng(0)
    worst = 0.0
    for p, g_an in zip(params, analytic):
        flat = p.data.reshape(-1)
        n = flat.size
        if entries_per_param is not None and entries_per_param < n:
            idxs = rng.choice(n, size=entries_per_param, replace=False)
        else:
            idxs = np.arange(n)
        g_an_flat = g_an.reshape(-1)
        for i in idxs:
            orig = flat[i]
            flat[i] = orig + h
            up = f().item()
            flat[i] = orig - h
            down = f().item()
            flat[i] = orig
            if not (math.isfinite(up) and math.isfinite(down)):
                raise NonFiniteLossError(f"loss non-finite at perturbed point (entry {i}): {up}, {down}")
            g_fd = (up - down) / (2.0 * h)
            rel = abs(g_fd - g_an_flat[i]) / max(1.0, abs(g_fd) + abs(g_an_flat[i]))
            if rel > worst:
                worst = rel
    return worst
