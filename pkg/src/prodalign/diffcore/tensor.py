"""Reverse-mode autodiff over dense float64 arrays.

Each op returns a new Tensor holding its forward value and a closure that
pushes gradients to its parents. `backward()` replays closures in exact
reverse topological order, so repeated backward passes over the same graph
accumulate gradients bit-identically.

Shapes are plain row-major numpy arrays. The only broadcast allowed is the
bias add of a (d,) vector onto (n, d) rows; everything else must match
exactly, which keeps every backward rule auditable by hand.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

LAYER_NORM_EPS = 1e-5


class ShapeError(ValueError):
    """Incompatible operand shapes for an op."""

    def __init__(self, op: str, *shapes: tuple[int, ...]):
        super().__init__(f"{op}: incompatible shapes {' vs '.join(str(s) for s in shapes)}")
        self.op = op
        self.shapes = shapes


class ZeroNormError(ValueError):
    """A vector that must be normalized has zero norm (upstream bug)."""


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "frozen", "_parents", "_backward")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        parents: tuple["Tensor", ...] = (),
        backward: Callable[[], None] | None = None,
    ):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.frozen = False
        self._parents = parents
        self._backward = backward

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError("item", self.shape)
        return float(self.data.reshape(()))

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Backpropagate from a scalar. Deterministic given a fixed graph."""
        if self.data.size != 1:
            raise ShapeError("backward", self.shape)
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        self._accumulate(np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward is not None:
                node._backward()

    # Operator sugar for the common cases.
    def __add__(self, other):
        if isinstance(other, Tensor):
            return add(self, other)
        return shift(self, float(other))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Tensor):
            return sub(self, other)
        return shift(self, -float(other))

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, float(other))

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def constant(data) -> Tensor:
    return Tensor(data, requires_grad=False)


def parameter(data) -> Tensor:
    return Tensor(np.array(data, dtype=np.float64, copy=True), requires_grad=True)


def _needs(*ts: Tensor) -> bool:
    return any(t.requires_grad for t in ts)


def _node(data, parents: tuple[Tensor, ...], backward: Callable[[], None]) -> Tensor:
    if _needs(*parents):
        return Tensor(data, requires_grad=True, parents=parents, backward=backward)
    return Tensor(data)


def add(a: Tensor, b: Tensor) -> Tensor:
    bias_add = a.data.ndim == 2 and b.data.ndim == 1 and a.shape[1] == b.shape[0]
    if a.shape != b.shape and not bias_add:
        raise ShapeError("add", a.shape, b.shape)
    out_data = a.data + b.data

    def backward():
        if a.requires_grad:
            a._accumulate(out.grad)
        if b.requires_grad:
            b._accumulate(out.grad.sum(axis=0) if bias_add else out.grad)

    out = _node(out_data, (a, b), backward)
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    return add(a, neg(b))


def neg(a: Tensor) -> Tensor:
    return scale(a, -1.0)


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError("mul", a.shape, b.shape)
    out_data = a.data * b.data

    def backward():
        if a.requires_grad:
            a._accumulate(b.data * out.grad)
        if b.requires_grad:
            b._accumulate(a.data * out.grad)

    out = _node(out_data, (a, b), backward)
    return out


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)

    def backward():
        if a.requires_grad:
            a._accumulate(c * out.grad)

    out = _node(a.data * c, (a,), backward)
    return out


def shift(a: Tensor, c: float) -> Tensor:
    def backward():
        if a.requires_grad:
            a._accumulate(out.grad)

    out = _node(a.data + float(c), (a,), backward)
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    ad, bd = a.data.ndim, b.data.ndim
    ok = (
        (ad == 2 and bd == 2 and a.shape[1] == b.shape[0])
        or (ad == 2 and bd == 1 and a.shape[1] == b.shape[0])
        or (ad == 1 and bd == 2 and a.shape[0] == b.shape[0])
    )
    if not ok:
        raise ShapeError("matmul", a.shape, b.shape)
    out_data = a.data @ b.data

    def backward():
        g = out.grad
        if ad == 2 and bd == 2:
            if a.requires_grad:
                a._accumulate(g @ b.data.T)
            if b.requires_grad:
                b._accumulate(a.data.T @ g)
        elif ad == 2 and bd == 1:
            if a.requires_grad:
                a._accumulate(np.outer(g, b.data))
            if b.requires_grad:
                b._accumulate(a.data.T @ g)
        else:  # 1-D @ 2-D
            if a.requires_grad:
                a._accumulate(b.data @ g)
            if b.requires_grad:
                b._accumulate(np.outer(a.data, g))

    out = _node(out_data, (a, b), backward)
    return out


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0

    def backward():
        if a.requires_grad:
            a._accumulate(mask * out.grad)

    out = _node(np.where(mask, a.data, 0.0), (a,), backward)
    return out


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    out_data = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))

    def backward():
        if a.requires_grad:
            a._accumulate(out_data * (1.0 - out_data) * out.grad)

    out = _node(out_data, (a,), backward)
    return out


def softplus(a: Tensor) -> Tensor:
    """log(1 + e^x), computed without overflow."""
    out_data = np.logaddexp(0.0, a.data)

    def backward():
        if a.requires_grad:
            x = a.data
            sig = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
            a._accumulate(sig * out.grad)

    out = _node(out_data, (a,), backward)
    return out


def log(a: Tensor) -> Tensor:
    out_data = np.log(a.data)

    def backward():
        if a.requires_grad:
            a._accumulate(out.grad / a.data)

    out = _node(out_data, (a,), backward)
    return out


def exp(a: Tensor) -> Tensor:
    out_data = np.exp(a.data)

    def backward():
        if a.requires_grad:
            a._accumulate(out_data * out.grad)

    out = _node(out_data, (a,), backward)
    return out


def softmax(a: Tensor) -> Tensor:
    """Softmax over the last axis (1-D vector or 2-D rows)."""
    if a.data.ndim not in (1, 2):
        raise ShapeError("softmax", a.shape)
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=-1, keepdims=True)

    def backward():
        if a.requires_grad:
            g = out.grad
            dot = (g * out_data).sum(axis=-1, keepdims=True)
            a._accumulate(out_data * (g - dot))

    out = _node(out_data, (a,), backward)
    return out


def logsumexp(a: Tensor) -> Tensor:
    """log sum exp over the last axis; (n, m) -> (n,), (m,) -> scalar ()."""
    if a.data.ndim not in (1, 2):
        raise ShapeError("logsumexp", a.shape)
    m = a.data.max(axis=-1, keepdims=True)
    e = np.exp(a.data - m)
    s = e.sum(axis=-1, keepdims=True)
    out_data = (np.log(s) + m).reshape(a.data.shape[:-1])

    def backward():
        if a.requires_grad:
            soft = e / s
            g = out.grad.reshape(a.data.shape[:-1] + (1,))
            a._accumulate(soft * g)

    out = _node(out_data, (a,), backward)
    return out


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = LAYER_NORM_EPS) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then affine."""
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError("layer_norm", x.shape, gain.shape, bias.shape)
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    y = (x.data - mu) * inv
    out_data = y * gain.data + bias.data

    def backward():
        g = out.grad
        if gain.requires_grad:
            gain._accumulate((g * y).reshape(-1, d).sum(axis=0))
        if bias.requires_grad:
            bias._accumulate(g.reshape(-1, d).sum(axis=0))
        if x.requires_grad:
            gy = g * gain.data
            mean_gy = gy.mean(axis=-1, keepdims=True)
            mean_gyy = (gy * y).mean(axis=-1, keepdims=True)
            x._accumulate(inv * (gy - mean_gy - y * mean_gyy))

    out = _node(out_data, (x, gain, bias), backward)
    return out


def l2_normalize(a: Tensor) -> Tensor:
    """Unit-normalize a vector or each row of a matrix. Zero norm is an error."""
    if a.data.ndim not in (1, 2):
        raise ShapeError("l2_normalize", a.shape)
    norms = np.linalg.norm(a.data, axis=-1, keepdims=True)
    if np.any(norms == 0.0):
        raise ZeroNormError("l2_normalize: zero-norm input")
    y = a.data / norms

    def backward():
        if a.requires_grad:
            g = out.grad
            dot = (g * y).sum(axis=-1, keepdims=True)
            a._accumulate((g - y * dot) / norms)

    out = _node(y, (a,), backward)
    return out


def cosine_sim(a: Tensor, b: Tensor) -> Tensor:
    """Cosine similarity of two vectors; differentiable in both."""
    if a.data.ndim != 1 or a.shape != b.shape:
        raise ShapeError("cosine_sim", a.shape, b.shape)
    return tsum(mul(l2_normalize(a), l2_normalize(b)))


def mean_pool(a: Tensor) -> Tensor:
    """Mean over the rows of a (n, d) matrix -> (d,)."""
    if a.data.ndim != 2:
        raise ShapeError("mean_pool", a.shape)
    n = a.shape[0]

    def backward():
        if a.requires_grad:
            a._accumulate(np.repeat(out.grad[None, :], n, axis=0) / n)

    out = _node(a.data.mean(axis=0), (a,), backward)
    return out


def tsum(a: Tensor, axis: int | None = None) -> Tensor:
    out_data = a.data.sum(axis=axis)

    def backward():
        if a.requires_grad:
            if axis is None:
                a._accumulate(np.full_like(a.data, float(out.grad)))
            else:
                a._accumulate(np.expand_dims(out.grad, axis) * np.ones_like(a.data))

    out = _node(out_data, (a,), backward)
    return out


def mean(a: Tensor) -> Tensor:
    return scale(tsum(a), 1.0 / a.data.size)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = list(tensors)
    if not tensors:
        raise ShapeError("concat")
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward():
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                idx = [slice(None)] * out_data.ndim
                idx[axis] = slice(lo, hi)
                t._accumulate(out.grad[tuple(idx)])

    out = _node(out_data, tuple(tensors), backward)
    return out


def stack_rows(vectors: Iterable[Tensor]) -> Tensor:
    """Stack 1-D tensors of equal length into a (n, d) matrix."""
    return concat([reshape(v, (1, v.shape[0])) for v in vectors], axis=0)


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeError("transpose", a.shape)

    def backward():
        if a.requires_grad:
            a._accumulate(out.grad.T)

    out = _node(a.data.T, (a,), backward)
    return out


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    out_data = a.data.reshape(shape)

    def backward():
        if a.requires_grad:
            a._accumulate(out.grad.reshape(a.data.shape))

    out = _node(out_data, (a,), backward)
    return out


def embedding(table: Tensor, ids) -> Tensor:
    """Gather rows of a (V, d) table by integer ids -> (n, d)."""
    if table.data.ndim != 2:
        raise ShapeError("embedding", table.shape)
    ids = np.asarray(ids, dtype=np.int64)
    out_data = table.data[ids]

    def backward():
        if table.requires_grad:
            g = np.zeros_like(table.data)
            np.add.at(g, ids, out.grad)
            table._accumulate(g)

    out = _node(out_data, (table,), backward)
    return out


def rowsel(a: Tensor, idx) -> Tensor:
    """Pick one entry per row of a (n, m) matrix: out[i] = a[i, idx[i]]."""
    if a.data.ndim != 2:
        raise ShapeError("rowsel", a.shape)
    idx = np.asarray(idx, dtype=np.int64)
    rows = np.arange(a.shape[0])
    out_data = a.data[rows, idx]

    def backward():
        if a.requires_grad:
            g = np.zeros_like(a.data)
            np.add.at(g, (rows, idx), out.grad)
            a._accumulate(g)

    out = _node(out_data, (a,), backward)
    return out
