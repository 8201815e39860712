"""Minimal reverse-mode differentiation over numpy arrays.

A :class:`Tensor` records the operation that produced it and its input
tensors; :func:`backward` walks the tape in reverse topological order and
accumulates gradients into every tracked ancestor.  Only the operations
the taggers need are implemented; shapes follow a row convention where
batches and sequences sit on axis 0.

Gradient recording can be suspended with :func:`no_grad` for inference,
in which case the same functions compute values without building a tape.
"""

from __future__ import annotations

import contextlib

import numpy as np

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Run the enclosed forward passes without recording gradients."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "parents", "bw", "tracked")

    def __init__(self, data, parents=(), bw=None, tracked=False):
        self.data = data if isinstance(data, np.ndarray) else np.asarray(data, dtype=np.float64)
        self.grad = None
        self.parents = parents
        self.bw = bw
        self.tracked = tracked

    @property
    def shape(self):
        return self.data.shape

    def accumulate(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, tracked={self.tracked})"


def leaf(data) -> Tensor:
    """A tracked graph input (parameter or parameter row)."""
    return Tensor(data, tracked=_grad_enabled)


def _coerce(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, s in enumerate(shape):
        if s == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    out = a.data + b.data
    if not (_grad_enabled and (a.tracked or b.tracked)):
        return Tensor(out)

    def bw(g):
        if a.tracked:
            a.accumulate(_unbroadcast(g, a.data.shape))
        if b.tracked:
            b.accumulate(_unbroadcast(g, b.data.shape))

    return Tensor(out, (a, b), bw, True)


def mul(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    out = a.data * b.data
    if not (_grad_enabled and (a.tracked or b.tracked)):
        return Tensor(out)

    def bw(g):
        if a.tracked:
            a.accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b.tracked:
            b.accumulate(_unbroadcast(g * a.data, b.data.shape))

    return Tensor(out, (a, b), bw, True)


def matmul(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    out = a.data @ b.data
    if not (_grad_enabled and (a.tracked or b.tracked)):
        return Tensor(out)

    def bw(g):
        if a.tracked:
            a.accumulate(g @ b.data.T)
        if b.tracked:
            b.accumulate(a.data.T @ g)

    return Tensor(out, (a, b), bw, True)


def linear(x, w) -> Tensor:
    """``x @ w.T`` for row inputs (B, D) and weights (H, D)."""
    x, w = _coerce(x), _coerce(w)
    out = x.data @ w.data.T
    if not (_grad_enabled and (x.tracked or w.tracked)):
        return Tensor(out)

    def bw(g):
        if x.tracked:
            x.accumulate(g @ w.data)
        if w.tracked:
            w.accumulate(g.T @ x.data)

    return Tensor(out, (x, w), bw, True)


def sigmoid(a) -> Tensor:
    a = _coerce(a)
    out = 1.0 / (1.0 + np.exp(-a.data))
    if not (_grad_enabled and a.tracked):
        return Tensor(out)

    def bw(g):
        a.accumulate(g * out * (1.0 - out))

    return Tensor(out, (a,), bw, True)


def tanh(a) -> Tensor:
    a = _coerce(a)
    out = np.tanh(a.data)
    if not (_grad_enabled and a.tracked):
        return Tensor(out)

    def bw(g):
        a.accumulate(g * (1.0 - out * out))

    return Tensor(out, (a,), bw, True)


def concat_cols(parts: list[Tensor]) -> Tensor:
    """Concatenate row matrices along axis 1."""
    parts = [_coerce(p) for p in parts]
    out = np.concatenate([p.data for p in parts], axis=1)
    if not (_grad_enabled and any(p.tracked for p in parts)):
        return Tensor(out)
    widths = [p.data.shape[1] for p in parts]

    def bw(g):
        offset = 0
        for p, w in zip(parts, widths):
            if p.tracked:
                p.accumulate(g[:, offset : offset + w])
            offset += w

    return Tensor(out, tuple(parts), bw, True)


def concat_vecs(parts: list[Tensor]) -> Tensor:
    """Concatenate 1-D tensors into one vector."""
    parts = [_coerce(p) for p in parts]
    out = np.concatenate([p.data for p in parts])
    if not (_grad_enabled and any(p.tracked for p in parts)):
        return Tensor(out)
    widths = [p.data.shape[0] for p in parts]

    def bw(g):
        offset = 0
        for p, w in zip(parts, widths):
            if p.tracked:
                p.accumulate(g[offset : offset + w])
            offset += w

    return Tensor(out, tuple(parts), bw, True)


def vcat(parts: list[Tensor]) -> Tensor:
    """Concatenate row matrices along axis 0."""
    parts = [_coerce(p) for p in parts]
    out = np.concatenate([p.data for p in parts], axis=0)
    if not (_grad_enabled and any(p.tracked for p in parts)):
        return Tensor(out)
    heights = [p.data.shape[0] for p in parts]

    def bw(g):
        offset = 0
        for p, h in zip(parts, heights):
            if p.tracked:
                p.accumulate(g[offset : offset + h])
            offset += h

    return Tensor(out, tuple(parts), bw, True)


def stack_rows(parts: list[Tensor]) -> Tensor:
    """Stack 1-D tensors into a (len(parts), dim) matrix."""
    parts = [_coerce(p) for p in parts]
    out = np.stack([p.data for p in parts], axis=0)
    if not (_grad_enabled and any(p.tracked for p in parts)):
        return Tensor(out)

    def bw(g):
        for i, p in enumerate(parts):
            if p.tracked:
                p.accumulate(g[i])

    return Tensor(out, tuple(parts), bw, True)


def row(a: Tensor, t: int) -> Tensor:
    """Row ``t`` of a matrix as a (1, dim) tensor."""
    out = a.data[t : t + 1]
    if not (_grad_enabled and a.tracked):
        return Tensor(out)

    def bw(g):
        if a.grad is None:
            a.grad = np.zeros_like(a.data)
        a.grad[t] += g[0]

    return Tensor(out, (a,), bw, True)


def softmax_cross_entropy(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Summed cross-entropy of row-wise softmax against integer targets."""
    z = logits.data
    zmax = z.max(axis=1, keepdims=True)
    exp = np.exp(z - zmax)
    probs = exp / exp.sum(axis=1, keepdims=True)
    log_z = np.log(exp.sum(axis=1)) + zmax[:, 0]
    idx = np.arange(len(targets))
    loss = float(np.sum(log_z - z[idx, targets]))
    if not (_grad_enabled and logits.tracked):
        return Tensor(loss)

    def bw(g):
        d = probs.copy()
        d[idx, targets] -= 1.0
        logits.accumulate(g * d)

    return Tensor(loss, (logits,), bw, True)


def rows_softmax(logits: np.ndarray) -> np.ndarray:
    """Plain numpy row softmax (inference helper)."""
    zmax = logits.max(axis=1, keepdims=True)
    exp = np.exp(logits - zmax)
    return exp / exp.sum(axis=1, keepdims=True)


def backward(loss: Tensor):
    """Accumulate d(loss)/d(ancestor) into every tracked tensor's ``grad``."""
    if not loss.tracked:
        raise ValueError("loss tensor is not part of a recorded graph")
    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.tracked and id(p) not in visited:
                stack.append((p, False))

    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node.bw is not None and node.grad is not None:
            node.bw(node.grad)
