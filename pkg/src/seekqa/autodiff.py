"""Minimal reverse-mode automatic differentiation over numpy float64 arrays.

Each Tensor stores a value, an accumulated gradient of the same shape, and a
closure that propagates the gradient to its inputs. backward() on a scalar
output topologically sorts the graph and runs the closures in reverse. Only
the primitives the scoring model needs are provided; shapes are restricted to
exact matches plus scalar broadcast, so every backward rule stays explicit.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np


def _as_array(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


def _reduce_to(grad: np.ndarray, shape: tuple) -> np.ndarray:
    if grad.shape == shape:
        return grad
    if shape == ():
        return grad.sum()
    raise ValueError(f"cannot reduce gradient of shape {grad.shape} to {shape}")


def _check_broadcast(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape and a.shape != () and b.shape != ():
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")


class Tensor:
    __slots__ = ("data", "grad", "_backward", "_prev")

    def __init__(self, data, _prev: tuple = ()):
        self.data = _as_array(data)
        self.grad = np.zeros_like(self.data)
        self._backward = None
        self._prev = tuple(_prev)

    @property
    def shape(self) -> tuple:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape})"

    # -- arithmetic -----------------------------------------------------------

    def __add__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)
        _check_broadcast(self.data, other.data)
        out = Tensor(self.data + other.data, (self, other))

        def _backward():
            self.grad += _reduce_to(out.grad, self.data.shape)
            other.grad += _reduce_to(out.grad, other.data.shape)

        out._backward = _backward
        return out

    def __mul__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)
        _check_broadcast(self.data, other.data)
        out = Tensor(self.data * other.data, (self, other))

        def _backward():
            self.grad += _reduce_to(other.data * out.grad, self.data.shape)
            other.grad += _reduce_to(self.data * out.grad, other.data.shape)

        out._backward = _backward
        return out

    __radd__ = __add__
    __rmul__ = __mul__

    def __neg__(self) -> "Tensor":
        return self * -1.0

    def __sub__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)
        return self + (-other)

    def __rsub__(self, other) -> "Tensor":
        return (-self) + other

    def __truediv__(self, c: float) -> "Tensor":
        return self * (1.0 / float(c))

    # -- elementwise nonlinearities -------------------------------------------

    def tanh(self) -> "Tensor":
        t = np.tanh(self.data)
        out = Tensor(t, (self,))

        def _backward():
            self.grad += (1.0 - t * t) * out.grad

        out._backward = _backward
        return out

    def sigmoid(self) -> "Tensor":
        s = np.where(
            self.data >= 0,
            1.0 / (1.0 + np.exp(-np.clip(self.data, -500, None))),
            np.exp(np.clip(self.data, None, 500))
            / (1.0 + np.exp(np.clip(self.data, None, 500))),
        )
        out = Tensor(s, (self,))

        def _backward():
            self.grad += s * (1.0 - s) * out.grad

        out._backward = _backward
        return out

    def exp(self) -> "Tensor":
        e = np.exp(self.data)
        out = Tensor(e, (self,))

        def _backward():
            self.grad += e * out.grad

        out._backward = _backward
        return out

    def log(self) -> "Tensor":
        out = Tensor(np.log(self.data), (self,))

        def _backward():
            self.grad += out.grad / self.data

        out._backward = _backward
        return out

    # -- reductions and indexing ----------------------------------------------

    def sum(self) -> "Tensor":
        out = Tensor(self.data.sum(), (self,))

        def _backward():
            self.grad += out.grad  # scalar broadcast over the input shape

        out._backward = _backward
        return out

    def mean(self) -> "Tensor":
        return self.sum() / self.data.size

    def pick(self, i: int) -> "Tensor":
        if self.data.ndim != 1:
            raise ValueError("pick expects a 1-D tensor")
        out = Tensor(self.data[i], (self,))

        def _backward():
            self.grad[i] += out.grad

        out._backward = _backward
        return out

    def row(self, i: int) -> "Tensor":
        if self.data.ndim != 2:
            raise ValueError("row expects a 2-D tensor")
        out = Tensor(self.data[i], (self,))

        def _backward():
            self.grad[i] += out.grad

        out._backward = _backward
        return out

    # -- backprop -------------------------------------------------------------

    def backward(self) -> None:
        if self.data.shape != ():
            raise ValueError("backward requires a scalar output")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:  # iterative: graphs outgrow the recursion limit
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._prev:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward()


# -- linear algebra -----------------------------------------------------------

def matvec(w: Tensor, x: Tensor) -> Tensor:
    if w.data.ndim != 2 or x.data.ndim != 1 or w.data.shape[1] != x.data.shape[0]:
        raise ValueError(f"matvec shapes {w.data.shape} and {x.data.shape}")
    out = Tensor(w.data @ x.data, (w, x))

    def _backward():
        w.grad += np.outer(out.grad, x.data)
        x.grad += w.data.T @ out.grad

    out._backward = _backward
    return out


def dot(u: Tensor, v: Tensor) -> Tensor:
    if u.data.shape != v.data.shape or u.data.ndim != 1:
        raise ValueError(f"dot shapes {u.data.shape} and {v.data.shape}")
    out = Tensor(np.dot(u.data, v.data), (u, v))

    def _backward():
        u.grad += v.data * out.grad
        v.grad += u.data * out.grad

    out._backward = _backward
    return out


def concat(parts: Sequence[Tensor]) -> Tensor:
    parts = list(parts)
    if not parts or any(p.data.ndim != 1 for p in parts):
        raise ValueError("concat expects a nonempty sequence of 1-D tensors")
    sizes = [p.data.shape[0] for p in parts]
    out = Tensor(np.concatenate([p.data for p in parts]), tuple(parts))

    def _backward():
        off = 0
        for p, size in zip(parts, sizes):
            p.grad += out.grad[off:off + size]
            off += size

    out._backward = _backward
    return out


def add_n(parts: Sequence[Tensor]) -> Tensor:
    """Sum of same-shape tensors as one node, keeping the graph shallow."""
    parts = list(parts)
    if not parts:
        raise ValueError("add_n expects a nonempty sequence")
    shape = parts[0].data.shape
    if any(p.data.shape != shape for p in parts):
        raise ValueError("add_n expects matching shapes")
    out = Tensor(sum(p.data for p in parts), tuple(parts))

    def _backward():
        for p in parts:
            p.grad += out.grad

    out._backward = _backward
    return out


def pack(parts: Sequence[Tensor]) -> Tensor:
    """Gather scalar tensors into one 1-D tensor, e.g. attention logits."""
    parts = list(parts)
    if not parts or any(p.data.shape != () for p in parts):
        raise ValueError("pack expects a nonempty sequence of scalar tensors")
    out = Tensor(np.array([p.data for p in parts]), tuple(parts))

    def _backward():
        for i, p in enumerate(parts):
            p.grad += out.grad[i]

    out._backward = _backward
    return out


def stack(parts: Sequence[Tensor]) -> Tensor:
    parts = list(parts)
    if not parts or any(p.data.ndim != 1 for p in parts):
        raise ValueError("stack expects a nonempty sequence of 1-D tensors")
    out = Tensor(np.stack([p.data for p in parts]), tuple(parts))

    def _backward():
        for i, p in enumerate(parts):
            p.grad += out.grad[i]

    out._backward = _backward
    return out


# -- normalized weights -------------------------------------------------------

def softmax(x: Tensor) -> Tensor:
    if x.data.ndim != 1:
        raise ValueError("softmax expects a 1-D tensor")
    e = np.exp(x.data - np.max(x.data))  # shift by detached max
    y = e / e.sum()
    out = Tensor(y, (x,))

    def _backward():
        g = out.grad
        x.grad += y * (g - np.dot(g, y))

    out._backward = _backward
    return out


def log_softmax(x: Tensor) -> Tensor:
    if x.data.ndim != 1:
        raise ValueError("log_softmax expects a 1-D tensor")
    shifted = x.data - np.max(x.data)
    y = shifted - np.log(np.sum(np.exp(shifted)))
    out = Tensor(y, (x,))

    def _backward():
        g = out.grad
        x.grad += g - np.exp(y) * g.sum()

    out._backward = _backward
    return out


def parameters_of(obj) -> list[Tensor]:
    """Collect Tensor attributes (and Tensors inside list attributes) of obj."""
    found: list[Tensor] = []
    for name in sorted(vars(obj)):
        val = getattr(obj, name)
        if isinstance(val, Tensor):
            found.append(val)
        elif isinstance(val, (list, tuple)):
            found.extend(v for v in val if isinstance(v, Tensor))
    return found
