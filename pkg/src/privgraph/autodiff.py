"""Minimal reverse-mode automatic differentiation over numpy arrays.

Eager tape in the micrograd style, but each node wraps a float64 ndarray
instead of a scalar. Every operation records its parent nodes and a
closure that routes the output gradient back to them; ``backward()``
walks the tape once in reverse topological order.

Only the operations needed by the forward pass live here. Broadcasting
is supported for elementwise ops; matrix multiplication is restricted to
2-D operands.
"""

from __future__ import annotations

import numpy as np

__all__ = ["Tensor", "concat_rows"]


def _as_f64(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a gradient down to ``shape``, undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """One node of the computation graph.

    ``data`` is never mutated by graph operations; ``grad`` is allocated
    lazily during ``backward()`` and accumulated with ``+=``, so a node
    feeding several consumers receives the sum of their contributions.
    """

    __slots__ = ("data", "grad", "_parents", "_pull")

    def __init__(self, data, parents=(), pull=None):
        self.data = _as_f64(data)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = tuple(parents)
        self._pull = pull

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def _ensure_grad(self) -> np.ndarray:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        return self.grad

    # -- elementwise arithmetic -------------------------------------------

    def __add__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)
        out = Tensor(self.data + other.data, (self, other))

        def pull(g):
            self._ensure_grad()[...] += _unbroadcast(g, self.shape)
            other._ensure_grad()[...] += _unbroadcast(g, other.shape)

        out._pull = pull
        return out

    __radd__ = __add__

    def __mul__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)
        out = Tensor(self.data * other.data, (self, other))

        def pull(g):
            self._ensure_grad()[...] += _unbroadcast(g * other.data, self.shape)
            other._ensure_grad()[...] += _unbroadcast(g * self.data, other.shape)

        out._pull = pull
        return out

    __rmul__ = __mul__

    def __neg__(self) -> "Tensor":
        return self * -1.0

    def __sub__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)
        return self + (-other)

    def __rsub__(self, other) -> "Tensor":
        return Tensor(other) + (-self)

    def __truediv__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)
        out = Tensor(self.data / other.data, (self, other))

        def pull(g):
            self._ensure_grad()[...] += _unbroadcast(g / other.data, self.shape)
            other._ensure_grad()[...] += _unbroadcast(
                -g * self.data / (other.data * other.data), other.shape
            )

        out._pull = pull
        return out

    # -- linear algebra ----------------------------------------------------

    def __matmul__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)
        if self.data.ndim != 2 or other.data.ndim != 2:
            raise ValueError("matmul supports 2-D operands only")
        out = Tensor(self.data @ other.data, (self, other))

        def pull(g):
            self._ensure_grad()[...] += g @ other.data.T
            other._ensure_grad()[...] += self.data.T @ g

        out._pull = pull
        return out

    def T(self) -> "Tensor":
        out = Tensor(self.data.T, (self,))

        def pull(g):
            self._ensure_grad()[...] += g.T

        out._pull = pull
        return out

    # -- shape manipulation --------------------------------------------------

    def reshape(self, shape) -> "Tensor":
        out = Tensor(self.data.reshape(shape), (self,))

        def pull(g):
            self._ensure_grad()[...] += g.reshape(self.shape)

        out._pull = pull
        return out

    def __getitem__(self, idx) -> "Tensor":
        out = Tensor(self.data[idx], (self,))

        def pull(g):
            np.add.at(self._ensure_grad(), idx, g)

        out._pull = pull
        return out

    # -- reductions ----------------------------------------------------------

    def sum(self, axis=None, keepdims=False) -> "Tensor":
        out = Tensor(self.data.sum(axis=axis, keepdims=keepdims), (self,))

        def pull(g):
            g = np.asarray(g)
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            self._ensure_grad()[...] += np.broadcast_to(g, self.shape)

        out._pull = pull
        return out

    def mean(self, axis=None, keepdims=False) -> "Tensor":
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    # -- nonlinearities --------------------------------------------------------

    def sigmoid(self) -> "Tensor":
        s = 1.0 / (1.0 + np.exp(-self.data))
        out = Tensor(s, (self,))

        def pull(g):
            self._ensure_grad()[...] += g * s * (1.0 - s)

        out._pull = pull
        return out

    def tanh(self) -> "Tensor":
        t = np.tanh(self.data)
        out = Tensor(t, (self,))

        def pull(g):
            self._ensure_grad()[...] += g * (1.0 - t * t)

        out._pull = pull
        return out

    def relu(self) -> "Tensor":
        out = Tensor(np.maximum(self.data, 0.0), (self,))

        def pull(g):
            self._ensure_grad()[...] += g * (self.data > 0.0)

        out._pull = pull
        return out

    def exp(self) -> "Tensor":
        e = np.exp(self.data)
        out = Tensor(e, (self,))

        def pull(g):
            self._ensure_grad()[...] += g * e

        out._pull = pull
        return out

    def log(self) -> "Tensor":
        out = Tensor(np.log(self.data), (self,))

        def pull(g):
            self._ensure_grad()[...] += g / self.data

        out._pull = pull
        return out

    def clip(self, lo: float, hi: float) -> "Tensor":
        # Zero gradient outside the clamp range, identity inside.
        out = Tensor(np.clip(self.data, lo, hi), (self,))

        def pull(g):
            inside = (self.data >= lo) & (self.data <= hi)
            self._ensure_grad()[...] += g * inside

        out._pull = pull
        return out

    # -- backward pass -----------------------------------------------------------

    def backward(self) -> None:
        """Accumulate d(self)/d(node) into every node reachable from self."""
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._pull is not None:
                node._pull(node.grad)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape})"


def concat_rows(a: Tensor, b: Tensor) -> Tensor:
    """Stack two 2-D tensors vertically (row concatenation)."""
    out = Tensor(np.concatenate([a.data, b.data], axis=0), (a, b))
    na = a.data.shape[0]

    def pull(g):
        a._ensure_grad()[...] += g[:na]
        b._ensure_grad()[...] += g[na:]

    out._pull = pull
    return out
