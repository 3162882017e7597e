"""Reverse-mode differentiation over numpy arrays.

A ``Tensor`` records the op that produced it; ``backward`` walks the graph in
reverse topological order.  Only the handful of primitives the recurrent
models need are provided.
"""
from __future__ import annotations

import numpy as np


class Tensor:
    __slots__ = ("data", "grad", "parents", "_back", "requires_grad")

    def __init__(self, data, parents=(), back=None, requires_grad=False):
        self.data = np.asarray(data, dtype=float)
        self.grad = None
        self.parents = parents
        self._back = back
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, neg(as_tensor(other)))

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward() needs a scalar loss")
        order = _topo(self)
        for node in order:
            node.grad = None
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._back is not None and node.grad is not None:
                node._back(node.grad)


def _topo(root: Tensor) -> list[Tensor]:
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def param(data) -> Tensor:
    return Tensor(np.array(data, dtype=float), requires_grad=True)


def _acc(t: Tensor, g):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=float)
    else:
        t.grad = t.grad + g


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data + b.data, (a, b))

    def back(g):
        _acc(a, _unbroadcast(g, a.shape))
        _acc(b, _unbroadcast(g, b.shape))
    out._back = back
    return out


def neg(a: Tensor) -> Tensor:
    out = Tensor(-a.data, (a,))
    out._back = lambda g: _acc(a, -g)
    return out


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data * b.data, (a, b))

    def back(g):
        _acc(a, _unbroadcast(g * b.data, a.shape))
        _acc(b, _unbroadcast(g * a.data, b.shape))
    out._back = back
    return out


def one_minus(a: Tensor) -> Tensor:
    out = Tensor(1.0 - a.data, (a,))
    out._back = lambda g: _acc(a, -g)
    return out


def matmul(a, W) -> Tensor:
    """``a @ W`` with ``a`` of shape (..., m) and ``W`` of shape (m, n)."""
    a, W = as_tensor(a), as_tensor(W)
    out = Tensor(a.data @ W.data, (a, W))

    def back(g):
        _acc(a, g @ W.data.T)
        if W.requires_grad:
            _acc(W, a.data.reshape(-1, a.shape[-1]).T @ g.reshape(-1, g.shape[-1]))
    out._back = back
    return out


def affine(a, W, b) -> Tensor:
    a, W, b = as_tensor(a), as_tensor(W), as_tensor(b)
    out = Tensor(a.data @ W.data + b.data, (a, W, b))

    def back(g):
        _acc(a, g @ W.data.T)
        g2 = g.reshape(-1, g.shape[-1])
        if W.requires_grad:
            _acc(W, a.data.reshape(-1, a.shape[-1]).T @ g2)
        _acc(b, g2.sum(axis=0).reshape(b.shape))
    out._back = back
    return out


def _sigmoid(x):
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def sigmoid(a: Tensor) -> Tensor:
    s = _sigmoid(a.data)
    out = Tensor(s, (a,))
    out._back = lambda g: _acc(a, g * s * (1.0 - s))
    return out


def tanh(a: Tensor) -> Tensor:
    t = np.tanh(a.data)
    out = Tensor(t, (a,))
    out._back = lambda g: _acc(a, g * (1.0 - t * t))
    return out


def cols(a: Tensor, start: int, stop: int) -> Tensor:
    """Slice of the last axis."""
    out = Tensor(a.data[..., start:stop], (a,))

    def back(g):
        full = np.zeros_like(a.data)
        full[..., start:stop] = g
        _acc(a, full)
    out._back = back
    return out


def step(a: Tensor, t: int) -> Tensor:
    """Time slice ``a[:, t]`` of a (batch, time, ...) tensor."""
    out = Tensor(a.data[:, t], (a,))

    def back(g):
        full = np.zeros_like(a.data)
        full[:, t] = g
        _acc(a, full)
    out._back = back
    return out


def concat(parts: list[Tensor], axis: int = -1) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    out = Tensor(np.concatenate([p.data for p in parts], axis=axis), tuple(parts))
    sizes = np.cumsum([p.shape[axis] for p in parts])[:-1]

    def back(g):
        for p, gp in zip(parts, np.split(g, sizes, axis=axis)):
            _acc(p, gp)
    out._back = back
    return out


def stack(parts: list[Tensor], axis: int = 1) -> Tensor:
    out = Tensor(np.stack([p.data for p in parts], axis=axis), tuple(parts))

    def back(g):
        for i, p in enumerate(parts):
            _acc(p, np.take(g, i, axis=axis))
    out._back = back
    return out


def total(a: Tensor) -> Tensor:
    out = Tensor(a.data.sum(), (a,))
    out._back = lambda g: _acc(a, np.broadcast_to(g, a.shape))
    return out


def softmax_cross_entropy(logits: Tensor, targets: np.ndarray, mask: np.ndarray | None = None) -> Tensor:
    """Mean negative log-likelihood of integer ``targets`` over unmasked positions."""
    z = logits.data - logits.data.max(axis=-1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=-1, keepdims=True))
    if mask is None:
        mask = np.ones(targets.shape)
    denom = max(mask.sum(), 1.0)
    picked = np.take_along_axis(logp, targets[..., None], axis=-1)[..., 0]
    out = Tensor(-(picked * mask).sum() / denom, (logits,))

    def back(g):
        p = np.exp(logp)
        onehot = np.zeros_like(p)
        np.put_along_axis(onehot, targets[..., None], 1.0, axis=-1)
        _acc(logits, g * (p - onehot) * (mask / denom)[..., None])
    out._back = back
    return out


def attend(q: Tensor, H: Tensor, mask: np.ndarray | None = None) -> Tensor:
    """Batched ``softmax(H q) H``: ``q`` is (B, d), ``H`` is (B, T, d)."""
    scores = np.einsum("btd,bd->bt", H.data, q.data)
    if mask is not None:
        scores = np.where(mask > 0, scores, -np.inf)
    scores = scores - scores.max(axis=1, keepdims=True)
    w = np.exp(scores)
    w /= w.sum(axis=1, keepdims=True)
    out = Tensor(np.einsum("bt,btd->bd", w, H.data), (q, H))

    def back(g):
        gw = np.einsum("bd,btd->bt", g, H.data)
        gs = w * (gw - (gw * w).sum(axis=1, keepdims=True))
        _acc(q, np.einsum("bt,btd->bd", gs, H.data))
        _acc(H, np.einsum("bt,bd->btd", w, g) + np.einsum("bt,bd->btd", gs, q.data))
    out._back = back
    return out


def grad(loss: Tensor, params: dict[str, Tensor]) -> dict[str, np.ndarray]:
    """Gradients of a scalar ``loss`` with respect to every parameter."""
    loss.backward()
    return {name: (p.grad if p.grad is not None else np.zeros_like(p.data)) for name, p in params.items()}
