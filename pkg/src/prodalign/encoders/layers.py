"""Parameter containers and forward rules for the encoder building blocks."""

from __future__ import annotations

import math

import numpy as np

from .. import diffcore as dc
from ..diffcore import Tensor


class Linear:
    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator):
        self.w = dc.parameter(rng.normal(0.0, 1.0 / math.sqrt(d_in), size=(d_out, d_in)))
        self.b = dc.parameter(np.zeros(d_out))

    def __call__(self, x: Tensor) -> Tensor:
        if x.data.ndim == 1:
            return dc.add(dc.matmul(self.w, x), self.b)
        return dc.add(dc.matmul(x, dc.transpose(self.w)), self.b)

    def params(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}.w": self.w, f"{prefix}.b": self.b}


class LayerNorm:
    def __init__(self, d: int):
        self.gain = dc.parameter(np.ones(d))
        self.bias = dc.parameter(np.zeros(d))

    def __call__(self, x: Tensor) -> Tensor:
        return dc.layer_norm(x, self.gain, self.bias)

    def params(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}.gain": self.gain, f"{prefix}.bias": self.bias}


class TransformerBlock:
    """Pre-norm block: single-head self-attention plus a two-layer feed-forward."""

    def __init__(self, d: int, rng: np.random.Generator):
        self.d = d
        self.ln_attn = LayerNorm(d)
        self.wq = Linear(d, d, rng)
        self.wk = Linear(d, d, rng)
        self.wv = Linear(d, d, rng)
        self.wo = Linear(d, d, rng)
        self.ln_ff = LayerNorm(d)
        self.ff1 = Linear(d, 2 * d, rng)
        self.ff2 = Linear(2 * d, d, rng)

    def __call__(self, x: Tensor) -> Tensor:
        h = self.ln_attn(x)
        q, k, v = self.wq(h), self.wk(h), self.wv(h)
        scores = dc.scale(dc.matmul(q, dc.transpose(k)), 1.0 / math.sqrt(self.d))
        attn = dc.matmul(dc.softmax(scores), v)
        x = dc.add(x, self.wo(attn))
        h = self.ln_ff(x)
        return dc.add(x, self.ff2(dc.relu(self.ff1(h))))

    def params(self, prefix: str) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        out.update(self.ln_attn.params(f"{prefix}.ln_attn"))
        out.update(self.wq.params(f"{prefix}.wq"))
        out.update(self.wk.params(f"{prefix}.wk"))
        out.update(self.wv.params(f"{prefix}.wv"))
        out.update(self.wo.params(f"{prefix}.wo"))
        out.update(self.ln_ff.params(f"{prefix}.ln_ff"))
        out.update(self.ff1.params(f"{prefix}.ff1"))
        out.update(self.ff2.params(f"{prefix}.ff2"))
        return out


class CrossAttentionBlock:
    """Text tokens attend over a small set of slots derived from the image vector."""

    def __init__(self, d: int, n_slots: int, rng: np.random.Generator):
        self.d = d
        self.n_slots = n_slots
        self.slot_proj = Linear(d, n_slots * d, rng)
        self.ln_attn = LayerNorm(d)
        self.wq = Linear(d, d, rng)
        self.wk = Linear(d, d, rng)
        self.wv = Linear(d, d, rng)
        self.wo = Linear(d, d, rng)
        self.ln_ff = LayerNorm(d)
        self.ff1 = Linear(d, 2 * d, rng)
        self.ff2 = Linear(2 * d, d, rng)

    def __call__(self, x: Tensor, image_vec: Tensor) -> Tensor:
        slots = dc.reshape(self.slot_proj(image_vec), (self.n_slots, self.d))
        h = self.ln_attn(x)
        q = self.wq(h)
        k, v = self.wk(slots), self.wv(slots)
        scores = dc.scale(dc.matmul(q, dc.transpose(k)), 1.0 / math.sqrt(self.d))
        attn = dc.matmul(dc.softmax(scores), v)
        x = dc.add(x, self.wo(attn))
        h = self.ln_ff(x)
        return dc.add(x, self.ff2(dc.relu(self.ff1(h))))

    def params(self, prefix: str) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        out.update(self.slot_proj.params(f"{prefix}.slot_proj"))
        out.update(self.ln_attn.params(f"{prefix}.ln_attn"))
        out.update(self.wq.params(f"{prefix}.wq"))
        out.update(self.wk.params(f"{prefix}.wk"))
        out.update(self.wv.params(f"{prefix}.wv"))
        out.update(self.wo.params(f"{prefix}.wo"))
        out.update(self.ln_ff.params(f"{prefix}.ln_ff"))
        out.update(self.ff1.params(f"{prefix}.ff1"))
        out.update(self.ff2.params(f"{prefix}.ff2"))
        return out
