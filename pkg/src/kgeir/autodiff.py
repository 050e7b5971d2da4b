"""Minimal reverse-mode automatic differentiation over dense numpy arrays.

Every operation on a :class:`Var` records its parents and a backward rule;
:meth:`Var.backward` replays the recorded graph in reverse topological
order. Functions in this module accept plain arrays as well, in which case
they return plain arrays and record nothing, so model code can be written
once and run both with and without gradients.
"""

from __future__ import annotations

from typing import Callable, Iterable, Mapping

import numpy as np
import scipy.sparse as sp
from scipy.special import expit


class NonFiniteError(FloatingPointError):
    """Raised when an operation produces NaN or infinite values."""


def _check(value: np.ndarray, op: str) -> np.ndarray:
    if not np.all(np.isfinite(value)):
        raise NonFiniteError(f"non-finite value produced by {op}")
    return value


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Var:
    """A node in the recorded computation graph."""

    __array_ufunc__ = None  # make numpy defer to our reflected operators
    __slots__ = ("value", "grad", "_parents", "_backward", "op")

    def __init__(
        self,
        value,
        parents: tuple["Var", ...] = (),
        backward: Callable[[np.ndarray], Iterable[np.ndarray | None]] | None = None,
        op: str = "leaf",
    ):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self._parents = parents
        self._backward = backward
        self.op = op

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    def __len__(self) -> int:
        return len(self.value)

    def __repr__(self) -> str:
        return f"Var(op={self.op}, shape={self.shape})"

    def backward(self) -> None:
        if self.value.size != 1:
            raise ValueError("backward() requires a scalar output")
        order: list[Var] = []
        seen: set[int] = set()
        stack: list[tuple[Var, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        for node in order:
            node.grad = None
        self.grad = np.ones_like(self.value)
        for node in reversed(order):
            if node._backward is None or node.grad is None:
                continue
            for parent, g in zip(node._parents, node._backward(node.grad)):
                if g is None:
                    continue
                parent.grad = g if parent.grad is None else parent.grad + g

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return add(self, neg(other))

    def __rsub__(self, other):
        return add(other, neg(self))

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        if isinstance(other, Var):
            return mul(self, reciprocal(other))
        return mul(self, 1.0 / np.asarray(other, dtype=np.float64))

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, index):
        return take(self, index)

    @property
    def T(self):
        return transpose(self)

    def sum(self, axis=None, keepdims=False):
        return vsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return vmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 else shape)


def value_of(x) -> np.ndarray:
    return x.value if isinstance(x, Var) else np.asarray(x, dtype=np.float64)


def _unary(x, fwd, bwd, op: str):
    if not isinstance(x, Var):
        return fwd(np.asarray(x, dtype=np.float64))
    with np.errstate(all="ignore"):  # overflow surfaces as NonFiniteError instead
        out = _check(fwd(x.value), op)
    return Var(out, (x,), lambda g: (bwd(g, x.value, out),), op)


def add(a, b):
    if not isinstance(a, Var) and not isinstance(b, Var):
        return np.add(a, b)
    av, bv = value_of(a), value_of(b)
    with np.errstate(all="ignore"):
        out = _check(av + bv, "add")
    parents = tuple(v for v in (a, b) if isinstance(v, Var))

    def backward(g):
        grads = []
        if isinstance(a, Var):
            grads.append(_unbroadcast(g, av.shape))
        if isinstance(b, Var):
            grads.append(_unbroadcast(g, bv.shape))
        return grads

    return Var(out, parents, backward, "add")


def neg(x):
    return _unary(x, np.negative, lambda g, xv, out: -g, "neg")


def mul(a, b):
    if not isinstance(a, Var) and not isinstance(b, Var):
        return np.multiply(a, b)
    av, bv = value_of(a), value_of(b)
    with np.errstate(all="ignore"):
        out = _check(av * bv, "mul")
    parents = tuple(v for v in (a, b) if isinstance(v, Var))

    def backward(g):
        grads = []
        if isinstance(a, Var):
            grads.append(_unbroadcast(g * bv, av.shape))
        if isinstance(b, Var):
            grads.append(_unbroadcast(g * av, bv.shape))
        return grads

    return Var(out, parents, backward, "mul")


def reciprocal(x):
    return _unary(x, lambda v: 1.0 / v, lambda g, xv, out: -g * out * out, "reciprocal")


def matmul(a, b):
    if not isinstance(a, Var) and not isinstance(b, Var):
        return np.matmul(a, b)
    av, bv = value_of(a), value_of(b)
    with np.errstate(all="ignore"):
        out = _check(np.matmul(av, bv), "matmul")
    parents = tuple(v for v in (a, b) if isinstance(v, Var))

    def backward(g):
        a2 = av[None, :] if av.ndim == 1 else av
        b2 = bv[:, None] if bv.ndim == 1 else bv
        g2 = g
        if av.ndim == 1:
            g2 = np.expand_dims(g2, -2)
        if bv.ndim == 1:
            g2 = np.expand_dims(g2, -1)
        grads = []
        if isinstance(a, Var):
            ga = np.matmul(g2, np.swapaxes(b2, -1, -2))
            if av.ndim == 1:
                ga = ga.reshape(ga.shape[:-2] + ga.shape[-1:])
            grads.append(_unbroadcast(ga, av.shape))
        if isinstance(b, Var):
            gb = np.matmul(np.swapaxes(a2, -1, -2), g2)
            if bv.ndim == 1:
                gb = gb[..., 0]
            grads.append(_unbroadcast(gb, bv.shape))
        return grads

    return Var(out, parents, backward, "matmul")


def transpose(x):
    return _unary(x, lambda v: v.T, lambda g, xv, out: g.T, "transpose")


def reshape(x, shape):
    if not isinstance(x, Var):
        return np.reshape(x, shape)
    old = x.shape
    return Var(np.reshape(x.value, shape), (x,), lambda g: (g.reshape(old),), "reshape")


def vsum(x, axis=None, keepdims=False):
    if not isinstance(x, Var):
        return np.sum(x, axis=axis, keepdims=keepdims)
    shape = x.shape

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return Var(np.sum(x.value, axis=axis, keepdims=keepdims), (x,), backward, "sum")


def vmean(x, axis=None, keepdims=False):
    n = value_of(x).size if axis is None else value_of(x).shape[axis]
    return vsum(x, axis=axis, keepdims=keepdims) * (1.0 / n)


def _is_row_gather(index) -> bool:
    return isinstance(index, np.ndarray) and index.dtype.kind in "iu"


def take(x, index):
    """Indexing with a numpy-style index; the backward pass scatter-adds."""
    if not isinstance(x, Var):
        return np.asarray(x)[index]
    shape = x.shape
    out = x.value[index]

    def backward(g):
        if _is_row_gather(index):
            flat = index.ravel()
            rows = g.reshape(flat.size, -1)
            scatter = sp.csr_matrix(
                (np.ones(flat.size), (flat, np.arange(flat.size))), shape=(shape[0], flat.size)
            )
            return (np.asarray(scatter @ rows).reshape(shape),)
        full = np.zeros(shape)
        np.add.at(full, index, g)
        return (full,)

    return Var(out, (x,), backward, "take")


def concat(items, axis: int = -1):
    if not any(isinstance(v, Var) for v in items):
        return np.concatenate([np.asarray(v, dtype=np.float64) for v in items], axis=axis)
    values = [value_of(v) for v in items]
    sizes = np.cumsum([v.shape[axis] for v in values])[:-1]
    parents = tuple(v for v in items if isinstance(v, Var))
    is_var = [isinstance(v, Var) for v in items]

    def backward(g):
        parts = np.split(g, sizes, axis=axis)
        return [p for p, flag in zip(parts, is_var) if flag]

    return Var(np.concatenate(values, axis=axis), parents, backward, "concat")


def sigmoid(x):
    return _unary(x, expit, lambda g, xv, out: g * out * (1.0 - out), "sigmoid")


def tanh(x):
    return _unary(x, np.tanh, lambda g, xv, out: g * (1.0 - out * out), "tanh")


def relu(x):
    return _unary(x, lambda v: np.maximum(v, 0.0), lambda g, xv, out: g * (xv > 0), "relu")


def exp(x):
    return _unary(x, np.exp, lambda g, xv, out: g * out, "exp")


def log(x):
    return _unary(x, np.log, lambda g, xv, out: g / xv, "log")


def softplus(x):
    return _unary(x, lambda v: np.logaddexp(0.0, v), lambda g, xv, out: g * expit(xv), "softplus")


def softmax(x, axis: int = -1):
    def fwd(v):
        z = v - v.max(axis=axis, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=axis, keepdims=True)

    def bwd(g, xv, out):
        return out * (g - (g * out).sum(axis=axis, keepdims=True))

    return _unary(x, fwd, bwd, "softmax")


def bce_with_logits(logits, labels, reduction: str = "mean"):
    """Binary cross-entropy of ``sigmoid(logits)`` against 0/1 labels."""
    y = np.asarray(labels, dtype=np.float64)
    zv = value_of(logits)
    losses = np.logaddexp(0.0, zv) - y * zv
    n = losses.size
    scale = 1.0 / n if reduction == "mean" else 1.0
    total = _check(np.asarray(losses.sum() * scale), "cross_entropy")
    if not isinstance(logits, Var):
        return total

    def backward(g):
        return ((expit(zv) - y) * scale * g,)

    return Var(total, (logits,), backward, "cross_entropy")


def dropout(x, rate: float, rng: np.random.Generator | None):
    if rng is None or rate <= 0.0:
        return x
    mask = (rng.random(value_of(x).shape) >= rate) / (1.0 - rate)
    return mul(x, mask)


def grad(
    fn: Callable[[dict[str, Var]], Var], params: Mapping[str, np.ndarray]
) -> tuple[float, dict[str, np.ndarray]]:
    """Evaluate ``fn`` on leaf variables built from ``params`` and differentiate.

    Returns the scalar loss and a gradient array for every named parameter
    (zeros for parameters the loss does not depend on).
    """
    leaves = {name: Var(np.array(value, dtype=np.float64)) for name, value in params.items()}
    loss = fn(leaves)
    if not isinstance(loss, Var):
        return float(loss), {k: np.zeros_like(v.value) for k, v in leaves.items()}
    if not np.isfinite(loss.value).all():
        raise NonFiniteError("loss is not finite")
    loss.backward()
    grads = {
        name: (leaf.grad if leaf.grad is not None else np.zeros_like(leaf.value))
        for name, leaf in leaves.items()
    }
    return float(loss.value), grads


def finite_difference(
    fn: Callable[[dict[str, np.ndarray]], float],
    params: Mapping[str, np.ndarray],
    step: float = 1e-5,
) -> dict[str, np.ndarray]:
    """Central finite differences of a scalar function of named arrays."""
    base = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    out: dict[str, np.ndarray] = {}
    for name, arr in base.items():
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            hi = float(fn(base))
            flat[i] = orig - step
            lo = float(fn(base))
            flat[i] = orig
            gflat[i] = (hi - lo) / (2.0 * step)
        out[name] = g
    return out


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-8) -> float:
    """Norm-wise relative error, floored so two vanishing gradients compare equal."""
    diff = float(np.linalg.norm(np.ravel(a) - np.ravel(b)))
    scale = max(float(np.linalg.norm(np.ravel(a))), float(np.linalg.norm(np.ravel(b))), floor)
    return diff / scale
