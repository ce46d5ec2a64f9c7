"""A small reverse-mode autodiff engine over numpy arrays.

Only what the toy point network and the losses need: broadcasting arithmetic,
batched matmul, relu, reductions, max-pooling, concatenation and a 3-vector cross
product. All arithmetic is float64.
"""
from __future__ import annotations

import numpy as np

from ..errors import NonScalarLoss


class Tensor:
    __slots__ = ("value", "grad", "parents", "backward_fn", "requires_grad", "name")

    def __init__(self, value, requires_grad=False, parents=(), backward_fn=None, name=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.parents = parents
        self.backward_fn = backward_fn
        self.requires_grad = requires_grad
        self.name = name

    def __repr__(self):
        tag = f" {self.name}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape}, requires_grad={self.requires_grad})"

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def numpy(self) -> np.ndarray:
        return self.value

    def zero_grad(self):
        self.grad = None

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)


def lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def param(value, name=None) -> Tensor:
    return Tensor(np.array(value, dtype=np.float64), requires_grad=True, name=name)


def _node(value, parents, backward_fn) -> Tensor:
    if any(p.requires_grad for p in parents):
        return Tensor(value, True, parents, backward_fn)
    return Tensor(value)


def unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum ``g`` down to ``shape`` (the inverse of numpy broadcasting)."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = lift(a), lift(b)
    return _node(
        a.value + b.value,
        (a, b),
        lambda g: (unbroadcast(g, a.shape), unbroadcast(g, b.shape)),
    )


def sub(a, b) -> Tensor:
    a, b = lift(a), lift(b)
    return _node(
        a.value - b.value,
        (a, b),
        lambda g: (unbroadcast(g, a.shape), unbroadcast(-g, b.shape)),
    )


def mul(a, b) -> Tensor:
    a, b = lift(a), lift(b)
    return _node(
        a.value * b.value,
        (a, b),
        lambda g: (unbroadcast(g * b.value, a.shape), unbroadcast(g * a.value, b.shape)),
    )


def div(a, b) -> Tensor:
    a, b = lift(a), lift(b)
    out = a.value / b.value
    return _node(
        out,
        (a, b),
        lambda g: (
            unbroadcast(g / b.value, a.shape),
            unbroadcast(-g * out / b.value, b.shape),
        ),
    )


def matmul(a, b) -> Tensor:
    a, b = lift(a), lift(b)

    def back(g):
        ga = g @ np.swapaxes(b.value, -1, -2)
        gb = np.swapaxes(a.value, -1, -2) @ g
        return unbroadcast(ga, a.shape), unbroadcast(gb, b.shape)

    return _node(a.value @ b.value, (a, b), back)


def relu(x) -> Tensor:
    x = lift(x)
    mask = x.value > 0.0
    return _node(np.where(mask, x.value, 0.0), (x,), lambda g: (g * mask,))


def exp(x) -> Tensor:
    x = lift(x)
    out = np.exp(x.value)
    return _node(out, (x,), lambda g: (g * out,))


def sqrt(x) -> Tensor:
    """Square root with subgradient 0 at 0."""
    x = lift(x)
    out = np.sqrt(x.value)
    pos = out > 0.0
    return _node(
        out, (x,), lambda g: (np.where(pos, g / (2.0 * np.where(pos, out, 1.0)), 0.0),)
    )


def tsum(x, axis=None, keepdims=False) -> Tensor:
    x = lift(x)

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _node(x.value.sum(axis=axis, keepdims=keepdims), (x,), back)


def mean(x, axis=None, keepdims=False) -> Tensor:
    x = lift(x)
    count = x.value.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return mul(tsum(x, axis, keepdims), 1.0 / count)


def max(x, axis: int, keepdims=False) -> Tensor:  # noqa: A001
    """Max reduction; the gradient goes to the first maximal entry."""
    x = lift(x)
    arg = np.expand_dims(np.argmax(x.value, axis=axis), axis)
    out = np.take_along_axis(x.value, arg, axis=axis)

    def back(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        gx = np.zeros(x.shape)
        np.put_along_axis(gx, arg, g, axis=axis)
        return (gx,)

    return _node(out if keepdims else np.squeeze(out, axis), (x,), back)


def minimum(a, b) -> Tensor:
    """Elementwise minimum; ties take ``a``."""
    a, b = lift(a), lift(b)
    pick_a = a.value <= b.value
    return _node(
        np.where(pick_a, a.value, b.value),
        (a, b),
        lambda g: (unbroadcast(g * pick_a, a.shape), unbroadcast(g * ~pick_a, b.shape)),
    )


def concat(tensors, axis: int = -1) -> Tensor:
    ts = [lift(t) for t in tensors]
    sizes = [t.shape[axis] for t in ts]
    cuts = np.cumsum(sizes)[:-1]
    return _node(
        np.concatenate([t.value for t in ts], axis=axis),
        tuple(ts),
        lambda g: tuple(np.split(g, cuts, axis=axis)),
    )


def broadcast_to(x, shape) -> Tensor:
    x = lift(x)
    return _node(np.broadcast_to(x.value, shape).copy(), (x,), lambda g: (unbroadcast(g, x.shape),))


def reshape(x, shape) -> Tensor:
    x = lift(x)
    return _node(x.value.reshape(shape), (x,), lambda g: (g.reshape(x.shape),))


def getitem(x, idx) -> Tensor:
    x = lift(x)

    def back(g):
        gx = np.zeros(x.shape)
        np.add.at(gx, idx, g)
        return (gx,)

    return _node(x.value[idx], (x,), back)


def cross(a, b) -> Tensor:
    """Cross product along the last axis (length 3)."""
    a, b = lift(a), lift(b)
    return _node(
        np.cross(a.value, b.value),
        (a, b),
        lambda g: (
            unbroadcast(np.cross(b.value, g), a.shape),
            unbroadcast(np.cross(g, a.value), b.shape),
        ),
    )


def _topo(root: Tensor) -> list:
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
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


def backward(loss: Tensor) -> None:
    """Populate ``.grad`` on every node reachable from the scalar ``loss``."""
    if loss.value.size != 1:
        raise NonScalarLoss(f"loss must be a scalar, got shape {loss.shape}")
    order = _topo(loss)
    for node in order:
        if node is not loss and node.backward_fn is not None:
            node.grad = None
    loss.grad = np.ones_like(loss.value)
    for node in reversed(order):
        if node.backward_fn is None or node.grad is None:
            continue
        for p, g in zip(node.parents, node.backward_fn(node.grad)):
            if p.requires_grad and g is not None:
                p.grad = g if p.grad is None else p.grad + g
