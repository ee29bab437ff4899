"""Reverse-mode differentiation over float64 numpy arrays.

Every op is a function that builds a new :class:`Tensor` holding its parents
and a closure mapping the output gradient to one gradient per parent.
Complex values are carried as a :class:`ComplexTensor` of two real tensors, so
the engine itself only ever differentiates real quantities.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

MAX_RANK = 3

_grad_enabled = True


class ShapeError(ValueError):
    pass


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "op", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, *, _op: str = "leaf",
                 _parents: tuple = (), _backward: Callable | None = None):
        data = np.asarray(data, dtype=np.float64)
        if data.ndim > MAX_RANK:
            raise ShapeError(f"rank {data.ndim} exceeds the supported maximum of {MAX_RANK}")
        self.data = data
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.op = _op
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def zero_grad(self):
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def backward(self):
        backward(self)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self.op!r}, requires_grad={self.requires_grad})"

    # operator sugar
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
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents: Sequence[Tensor], backward_fn, op: str) -> Tensor:
    if _grad_enabled and any(p.requires_grad for p in parents):
        return Tensor(data, True, _op=op, _parents=tuple(parents), _backward=backward_fn)
    return Tensor(data, _op=op)


# ---------------------------------------------------------------------------
# graph traversal


@dataclass
class Graph:
    """Recorded operations reachable from an output, inputs before consumers."""

    nodes: list

    @classmethod
    def trace(cls, output: Tensor) -> "Graph":
        order, seen = [], set()
        stack = [(output, False)]
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
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        return cls(order)

    def leaves(self) -> list:
        return [n for n in self.nodes if not n._parents]

    def backward(self, output: Tensor, seed: np.ndarray | None = None):
        grads = {id(output): np.ones_like(output.data) if seed is None else seed}
        for node in reversed(self.nodes):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if not node._parents:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                if id(parent) in grads:
                    grads[id(parent)] = grads[id(parent)] + pg
                else:
                    grads[id(parent)] = pg


def backward(loss: Tensor, graph: Graph | None = None) -> Graph:
    """Accumulate d(loss)/d(leaf) into ``leaf.grad`` for every requires_grad leaf."""
    if loss.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return Graph([])
    graph = graph or Graph.trace(loss)
    graph.backward(loss)
    return graph


# ---------------------------------------------------------------------------
# broadcasting helpers


def _broadcast_shape(a: tuple, b: tuple) -> tuple:
    n = max(len(a), len(b))
    a = (1,) * (n - len(a)) + tuple(a)
    b = (1,) * (n - len(b)) + tuple(b)
    out = []
    for x, y in zip(a, b):
        if x != y and x != 1 and y != 1:
            raise ShapeError(f"cannot broadcast shapes {a} and {b}: only extent-1 axes broadcast")
        out.append(max(x, y))
    return tuple(out)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------------------
# elementwise


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a.shape, b.shape)
    return _make(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)), "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a.shape, b.shape)
    return _make(a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)), "sub")


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _make(-a.data, (a,), lambda g: (-g,), "neg")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a.shape, b.shape)
    return _make(a.data * b.data, (a, b),
                 lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
                 "mul")


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a.shape, b.shape)
    out = a.data / b.data
    return _make(out, (a, b),
                 lambda g: (_unbroadcast(g / b.data, a.shape),
                            _unbroadcast(-g * out / b.data, b.shape)),
                 "div")


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return _make(out, (a,), lambda g: (g * out,), "exp")


def log(a) -> Tensor:
    a = as_tensor(a)
    return _make(np.log(a.data), (a,), lambda g: (g / a.data,), "log")


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    out = np.sqrt(a.data)
    return _make(out, (a,), lambda g: (g * 0.5 / out,), "sqrt")


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return _make(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,), "relu")


def clip(a, lo: float, hi: float) -> Tensor:
    a = as_tensor(a)
    inside = (a.data >= lo) & (a.data <= hi)
    return _make(np.clip(a.data, lo, hi), (a,), lambda g: (g * inside,), "clip")


# ---------------------------------------------------------------------------
# reductions and shape ops


def _norm_axis(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(ax % ndim for ax in axis)


def sum_(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    axes = _norm_axis(axis, a.ndim)
    out = a.data.sum(axis=axes, keepdims=keepdims)

    def bw(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _make(out, (a,), bw, "sum")


def mean(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    axes = _norm_axis(axis, a.ndim)
    count = int(np.prod([a.shape[ax] for ax in axes])) if axes else 1
    return mul(sum_(a, axis, keepdims), 1.0 / count)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    return _make(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),), "reshape")


def transpose(a) -> Tensor:
    """Swap the last two axes."""
    a = as_tensor(a)
    return _make(np.swapaxes(a.data, -1, -2), (a,), lambda g: (np.swapaxes(g, -1, -2),),
                 "transpose")


def getitem(a, index) -> Tensor:
    a = as_tensor(a)

    def bw(g):
        full = np.zeros_like(a.data)
        np.add.at(full, index, g)
        return (full,)

    return _make(a.data[index], (a,), bw, "getitem")


def roll(a, shift: int, axis: int) -> Tensor:
    a = as_tensor(a)
    return _make(np.roll(a.data, shift, axis=axis), (a,),
                 lambda g: (np.roll(g, -shift, axis=axis),), "roll")


def take_rows(table, ids) -> Tensor:
    """Row lookup ``table[ids]``; ``ids`` is an integer array of any shape."""
    table = as_tensor(table)
    ids = np.asarray(ids, dtype=np.int64)

    def bw(g):
        full = np.zeros_like(table.data)
        np.add.at(full, ids.reshape(-1), g.reshape(-1, table.shape[-1]))
        return (full,)

    return _make(table.data[ids], (table,), bw, "take_rows")


# ---------------------------------------------------------------------------
# linear algebra and normalizations


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[-1] != b.shape[-2 if b.ndim > 1 else 0]:
        raise ShapeError(f"matmul inner extents differ: {a.shape} @ {b.shape}")

    def bw(g):
        if b.ndim == 2 and a.ndim > 2:
            # shared right factor: fold the batch into rows instead of a (B, d, e) temporary
            ga = g @ b.data.T
            gb = a.data.reshape(-1, a.shape[-1]).T @ g.reshape(-1, g.shape[-1])
            return ga, gb
        if a.ndim == 2 and b.ndim > 2:
            ga = np.tensordot(g, b.data, axes=([0, 2], [0, 2]))
            return ga, a.data.T @ g
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _make(a.data @ b.data, (a, b), bw, "matmul")


def softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    z = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return _make(out, (a,), bw, "softmax")


def log_softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    z = a.data - a.data.max(axis=axis, keepdims=True)
    out = z - np.log(np.exp(z).sum(axis=axis, keepdims=True))

    def bw(g):
        return (g - np.exp(out) * g.sum(axis=axis, keepdims=True),)

    return _make(out, (a,), bw, "log_softmax")


def conv1x1(x, weight, bias=None) -> Tensor:
    """Channel map applied at every position of the last axis.

    A 1-D ``weight`` of length d is the diagonal form; a d x e matrix is the
    full form.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    out = mul(x, weight) if weight.ndim == 1 else matmul(x, weight)
    return out if bias is None else add(out, bias)


def layer_norm(x, axis: int = -1, eps: float = 1e-5) -> Tensor:
    """Parameter-free standardization along ``axis``."""
    centered = sub(x, mean(x, axis, keepdims=True))
    var = mean(mul(centered, centered), axis, keepdims=True)
    return div(centered, sqrt(add(var, eps)))


# ---------------------------------------------------------------------------
# complex values as real pairs


@dataclass
class ComplexTensor:
    re: Tensor
    im: Tensor

    def __post_init__(self):
        self.re, self.im = as_tensor(self.re), as_tensor(self.im)
        if self.re.shape != self.im.shape:
            raise ShapeError(f"real/imag shapes differ: {self.re.shape} vs {self.im.shape}")

    @classmethod
    def from_real(cls, x) -> "ComplexTensor":
        x = as_tensor(x)
        return cls(x, Tensor(np.zeros_like(x.data)))

    @classmethod
    def from_numpy(cls, z, requires_grad=False) -> "ComplexTensor":
        z = np.asarray(z, dtype=np.complex128)
        return cls(Tensor(z.real.copy(), requires_grad), Tensor(z.imag.copy(), requires_grad))

    @property
    def shape(self) -> tuple:
        return self.re.shape

    def numpy(self) -> np.ndarray:
        return self.re.data + 1j * self.im.data


def complex_mul(a: ComplexTensor, b: ComplexTensor) -> ComplexTensor:
    """(a.re + j a.im)(b.re + j b.im), elementwise."""
    return ComplexTensor(sub(mul(a.re, b.re), mul(a.im, b.im)),
                         add(mul(a.re, b.im), mul(a.im, b.re)))


def abs_sq(z: ComplexTensor) -> Tensor:
    """Power spectrum re^2 + im^2 (real output)."""
    return add(mul(z.re, z.re), mul(z.im, z.im))


# ---------------------------------------------------------------------------
# finite-difference checking


@dataclass
class GradCheckResult:
    name: str
    max_rel_err: float
    checked: int
    passed: bool


def gradcheck(fn: Callable[[], Tensor], params: dict, eps: float = 1e-5, rtol: float = 1e-4,
              threshold: float = 1e-8, max_entries: int | None = None,
              rng: np.random.Generator | None = None) -> list:
    """Compare analytic gradients of the scalar ``fn()`` with central differences.

    Components where both the analytic and the numeric gradient are at most
    ``threshold`` in magnitude are skipped. ``max_entries`` subsamples large
    parameters.
    """
    for p in params.values():
        p.grad = None
    loss = fn()
    backward(loss)
    results = []
    for name, p in params.items():
        analytic = np.zeros_like(p.data) if p.grad is None else p.grad.copy()
        flat = p.data.reshape(-1)
        idx = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            idx = (rng or np.random.default_rng(0)).choice(flat.size, max_entries, replace=False)
        worst, checked = 0.0, 0
        with no_grad():
            for i in idx:
                orig = flat[i]
                flat[i] = orig + eps
                up = fn().item()
                flat[i] = orig - eps
                down = fn().item()
                flat[i] = orig
                numeric = (up - down) / (2 * eps)
                a = analytic.reshape(-1)[i]
                scale = max(abs(a), abs(numeric))
                if scale <= threshold:
                    continue
                checked += 1
                worst = max(worst, abs(a - numeric) / scale)
        results.append(GradCheckResult(name, worst, checked, worst <= rtol))
    return results

