"""Dense tensors with reverse-mode automatic differentiation.

A ``Tensor`` wraps a numpy array and records the operations applied to it.
Calling :meth:`Tensor.backward` on a scalar result walks the recorded graph
in reverse topological order and accumulates gradients into every tensor
created with ``requires_grad=True``.

Conventions used throughout:

* gradients accumulate additively, so reusing a tensor twice doubles its grad;
* reduction ties (max, top-k) route gradient to the lowest flat index;
* tensors in a recorded graph are never mutated in place.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Sequence

import numpy as np


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible for an operation."""

    def __init__(self, op: str, *shapes):
        super().__init__(f"{op}: incompatible shapes {' vs '.join(str(tuple(s)) for s in shapes)}")
        self.op = op
        self.shapes = shapes


class NonFiniteError(FloatingPointError):
    """Raised by the nan guard when an op produces a non-finite value."""

    def __init__(self, op: str):
        super().__init__(f"{op}: produced a non-finite value")
        self.op = op


_grad_enabled = True
_nan_guard = False


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (forward-only evaluation)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


@contextlib.contextmanager
def nan_guard():
    """Check every op output for non-finite values inside the block."""
    global _nan_guard
    prev = _nan_guard
    _nan_guard = True
    try:
        yield
    finally:
        _nan_guard = prev


def _broadcast_check(op: str, a_shape, b_shape):
    try:
        np.broadcast_shapes(a_shape, b_shape)
    except ValueError:
        raise ShapeError(op, a_shape, b_shape) from None


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` over axes that were broadcast up from ``shape``."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _as_array(data, dtype=None) -> np.ndarray:
    arr = np.asarray(data)
    if dtype is not None:
        return arr.astype(dtype, copy=False)
    if arr.dtype.kind in "iub":
        return arr.astype(np.float64)
    return arr


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_backward", "_prev", "_op")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        self.data = _as_array(data, dtype)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._backward: Callable[[], None] | None = None
        self._prev: tuple[Tensor, ...] = ()
        self._op = ""

    # -- construction of op results ------------------------------------

    @classmethod
    def _result(cls, data: np.ndarray, parents: tuple["Tensor", ...], op: str) -> "Tensor":
        if _nan_guard and not np.all(np.isfinite(data)):
            raise NonFiniteError(op)
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out._backward = None
        out._op = op
        if _grad_enabled and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._prev = parents
        else:
            out.requires_grad = False
            out._prev = ()
        return out

    def _accumulate(self, grad: np.ndarray):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    # -- basic properties ------------------------------------------------

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data.item())

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        req = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{req}, op={self._op!r})"

    # -- backward ----------------------------------------------------------

    def backward(self, grad: np.ndarray | None = None):
        """Propagate gradients from this tensor back through the graph."""
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without an explicit gradient needs a scalar")
            grad = np.ones_like(self.data)
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._prev:
                if id(parent) not in visited:
                    stack.append((parent, False))
        self._accumulate(np.asarray(grad, dtype=self.data.dtype))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward()

    # -- elementwise arithmetic --------------------------------------------

    def _coerce(self, other) -> "Tensor":
        if isinstance(other, Tensor):
            return other
        return Tensor(np.asarray(other, dtype=self.data.dtype))

    def __add__(self, other):
        other = self._coerce(other)
        _broadcast_check("add", self.shape, other.shape)
        out = Tensor._result(self.data + other.data, (self, other), "add")
        if out.requires_grad:
            def _backward():
                if self.requires_grad:
                    self._accumulate(_unbroadcast(out.grad, self.shape))
                if other.requires_grad:
                    other._accumulate(_unbroadcast(out.grad, other.shape))
            out._backward = _backward
        return out

    def __radd__(self, other):
        return self.__add__(other)

    def __sub__(self, other):
        other = self._coerce(other)
        _broadcast_check("sub", self.shape, other.shape)
        out = Tensor._result(self.data - other.data, (self, other), "sub")
        if out.requires_grad:
            def _backward():
                if self.requires_grad:
                    self._accumulate(_unbroadcast(out.grad, self.shape))
                if other.requires_grad:
                    other._accumulate(_unbroadcast(-out.grad, other.shape))
            out._backward = _backward
        return out

    def __rsub__(self, other):
        return self._coerce(other).__sub__(self)

    def __mul__(self, other):
        other = self._coerce(other)
        _broadcast_check("mul", self.shape, other.shape)
        out = Tensor._result(self.data * other.data, (self, other), "mul")
        if out.requires_grad:
            def _backward():
                if self.requires_grad:
                    self._accumulate(_unbroadcast(out.grad * other.data, self.shape))
                if other.requires_grad:
                    other._accumulate(_unbroadcast(out.grad * self.data, other.shape))
            out._backward = _backward
        return out

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, other):
        other = self._coerce(other)
        _broadcast_check("div", self.shape, other.shape)
        out = Tensor._result(self.data / other.data, (self, other), "div")
        if out.requires_grad:
            def _backward():
                if self.requires_grad:
                    self._accumulate(_unbroadcast(out.grad / other.data, self.shape))
                if other.requires_grad:
                    other._accumulate(_unbroadcast(-out.grad * self.data / (other.data ** 2), other.shape))
            out._backward = _backward
        return out

    def __rtruediv__(self, other):
        return self._coerce(other).__truediv__(self)

    def __neg__(self):
        out = Tensor._result(-self.data, (self,), "neg")
        if out.requires_grad:
            def _backward():
                self._accumulate(-out.grad)
            out._backward = _backward
        return out

    def __matmul__(self, other):
        other = self._coerce(other)
        if self.ndim < 2 or other.ndim < 2 or self.shape[-1] != other.shape[-2]:
            raise ShapeError("matmul", self.shape, other.shape)
        out = Tensor._result(self.data @ other.data, (self, other), "matmul")
        if out.requires_grad:
            def _backward():
                if self.requires_grad:
                    ga = out.grad @ np.swapaxes(other.data, -1, -2)
                    self._accumulate(_unbroadcast(ga, self.shape))
                if other.requires_grad:
                    gb = np.swapaxes(self.data, -1, -2) @ out.grad
                    other._accumulate(_unbroadcast(gb, other.shape))
            out._backward = _backward
        return out

    # -- elementwise nonlinearities -----------------------------------------

    def exp(self) -> "Tensor":
        out = Tensor._result(np.exp(self.data), (self,), "exp")
        if out.requires_grad:
            def _backward():
                self._accumulate(out.grad * out.data)
            out._backward = _backward
        return out

    def log(self) -> "Tensor":
        out = Tensor._result(np.log(self.data), (self,), "log")
        if out.requires_grad:
            def _backward():
                self._accumulate(out.grad / self.data)
            out._backward = _backward
        return out

    def sigmoid(self) -> "Tensor":
        # Stable at both tails: exp of a non-positive argument only.
        x = self.data
        y = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                     np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
        out = Tensor._result(y, (self,), "sigmoid")
        if out.requires_grad:
            def _backward():
                self._accumulate(out.grad * out.data * (1.0 - out.data))
            out._backward = _backward
        return out

    def tanh(self) -> "Tensor":
        out = Tensor._result(np.tanh(self.data), (self,), "tanh")
        if out.requires_grad:
            def _backward():
                self._accumulate(out.grad * (1.0 - out.data ** 2))
            out._backward = _backward
        return out

    def gelu(self) -> "Tensor":
        # tanh approximation; the exact-erf form is not needed at this scale.
        c = np.sqrt(2.0 / np.pi)
        a = 0.044715
        x = self.data
        inner = c * (x + a * x ** 3)
        t = np.tanh(inner)
        out = Tensor._result(0.5 * x * (1.0 + t), (self,), "gelu")
        if out.requires_grad:
            def _backward():
                d = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t ** 2) * c * (1.0 + 3.0 * a * x ** 2)
                self._accumulate(out.grad * d)
            out._backward = _backward
        return out

    def powr(self, p: float) -> "Tensor":
        out = Tensor._result(self.data ** p, (self,), "powr")
        if out.requires_grad:
            def _backward():
                self._accumulate(out.grad * p * self.data ** (p - 1.0))
            out._backward = _backward
        return out

    def sqrt(self) -> "Tensor":
        return self.powr(0.5)

    def abs(self) -> "Tensor":
        out = Tensor._result(np.abs(self.data), (self,), "abs")
        if out.requires_grad:
            def _backward():
                self._accumulate(out.grad * np.sign(self.data))
            out._backward = _backward
        return out

    def clip(self, lo: float, hi: float) -> "Tensor":
        out = Tensor._result(np.clip(self.data, lo, hi), (self,), "clip")
        if out.requires_grad:
            def _backward():
                inside = (self.data >= lo) & (self.data <= hi)
                self._accumulate(out.grad * inside)
            out._backward = _backward
        return out

    # -- reductions -----------------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        out = Tensor._result(self.data.sum(axis=axis, keepdims=keepdims), (self,), "sum")
        if out.requires_grad:
            def _backward():
                g = out.grad
                if axis is not None and not keepdims:
                    g = np.expand_dims(g, axis)
                self._accumulate(np.broadcast_to(g, self.shape).copy())
            out._backward = _backward
        return out

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        count = self.size if axis is None else self.shape[axis]
        out = Tensor._result(self.data.mean(axis=axis, keepdims=keepdims), (self,), "mean")
        if out.requires_grad:
            def _backward():
                g = out.grad / count
                if axis is not None and not keepdims:
                    g = np.expand_dims(g, axis)
                self._accumulate(np.broadcast_to(g, self.shape).copy())
            out._backward = _backward
        return out

    def max(self, axis: int, keepdims: bool = False) -> "Tensor":
        """Max along ``axis``; ties route gradient to the lowest index."""
        if self.shape[axis] == 0:
            raise ShapeError("max", self.shape)
        data = self.data.max(axis=axis, keepdims=keepdims)
        out = Tensor._result(data, (self,), "max")
        if out.requires_grad:
            idx = np.argmax(self.data, axis=axis)
            def _backward():
                g = out.grad if keepdims else np.expand_dims(out.grad, axis)
                mask = np.zeros_like(self.data)
                np.put_along_axis(mask, np.expand_dims(idx, axis), 1.0, axis=axis)
                self._accumulate(mask * g)
            out._backward = _backward
        return out

    def topk(self, k: int) -> "Tensor":
        """The k largest values over all elements, descending.

        Ties prefer the lower flat index; gradient flows only to selected
        elements.
        """
        if k < 1 or k > self.size:
            raise ShapeError(f"topk(k={k})", self.shape)
        flat = self.data.reshape(-1)
        order = np.argsort(-flat, kind="stable")[:k]
        out = Tensor._result(flat[order], (self,), "topk")
        if out.requires_grad:
            def _backward():
                g = np.zeros(flat.shape, dtype=self.data.dtype)
                g[order] = out.grad
                self._accumulate(g.reshape(self.shape))
            out._backward = _backward
        return out

    # -- shape manipulation ------------------------------------------------

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        out = Tensor._result(self.data.reshape(shape), (self,), "reshape")
        if out.requires_grad:
            def _backward():
                self._accumulate(out.grad.reshape(self.shape))
            out._backward = _backward
        return out

    def transpose(self, *axes) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        out = Tensor._result(self.data.transpose(axes), (self,), "transpose")
        if out.requires_grad:
            inverse = np.argsort(axes)
            def _backward():
                self._accumulate(out.grad.transpose(inverse))
            out._backward = _backward
        return out

    def broadcast_to(self, shape) -> "Tensor":
        _broadcast_check("broadcast_to", self.shape, shape)
        out = Tensor._result(np.broadcast_to(self.data, shape).copy(), (self,), "broadcast_to")
        if out.requires_grad:
            def _backward():
                self._accumulate(_unbroadcast(out.grad, self.shape))
            out._backward = _backward
        return out

    def __getitem__(self, key) -> "Tensor":
        out = Tensor._result(self.data[key], (self,), "slice")
        if out.requires_grad:
            def _backward():
                g = np.zeros_like(self.data)
                g[key] += out.grad
                self._accumulate(g)
            out._backward = _backward
        return out

    def gather(self, indices, axis: int = 0) -> "Tensor":
        """Select along ``axis`` with an integer index array (embedding lookup)."""
        idx = np.asarray(indices)
        if idx.size and (idx.min() < 0 or idx.max() >= self.shape[axis]):
            raise IndexError(f"gather: index out of range for axis {axis} of size {self.shape[axis]}")
        out = Tensor._result(np.take(self.data, idx, axis=axis), (self,), "gather")
        if out.requires_grad:
            def _backward():
                g = np.zeros_like(self.data)
                moved = np.moveaxis(g, axis, 0)
                grad_moved = np.moveaxis(
                    out.grad, tuple(range(axis, axis + idx.ndim)), tuple(range(idx.ndim))
                )
                np.add.at(moved, idx, grad_moved)
                self._accumulate(g)
            out._backward = _backward
        return out

    # -- masking and normalization -------------------------------------------

    def masked_fill(self, mask, value: float) -> "Tensor":
        mask = np.asarray(mask, dtype=bool)
        _broadcast_check("masked_fill", self.shape, mask.shape)
        out = Tensor._result(np.where(mask, value, self.data), (self,), "masked_fill")
        if out.requires_grad:
            def _backward():
                self._accumulate(_unbroadcast(np.where(mask, 0.0, out.grad), self.shape))
            out._backward = _backward
        return out

    def softmax(self, axis: int) -> "Tensor":
        if self.shape[axis] == 0:
            raise ShapeError("softmax", self.shape)
        shifted = self.data - self.data.max(axis=axis, keepdims=True)
        e = np.exp(shifted)
        s = e / e.sum(axis=axis, keepdims=True)
        out = Tensor._result(s, (self,), "softmax")
        if out.requires_grad:
            def _backward():
                g = out.grad
                dot = (g * s).sum(axis=axis, keepdims=True)
                self._accumulate(s * (g - dot))
            out._backward = _backward
        return out

    def l2_normalize(self, axis: int, eps: float = 1e-12) -> "Tensor":
        norm = np.sqrt((self.data ** 2).sum(axis=axis, keepdims=True) + eps)
        y = self.data / norm
        out = Tensor._result(y, (self,), "l2_normalize")
        if out.requires_grad:
            def _backward():
                g = out.grad
                dot = (g * self.data).sum(axis=axis, keepdims=True)
                self._accumulate(g / norm - self.data * dot / norm ** 3)
            out._backward = _backward
        return out

    # -- 2D resampling (feature maps laid out [..., H, W, C]) -----------------

    def upsample_nearest(self, factor: int) -> "Tensor":
        if self.ndim < 3:
            raise ShapeError("upsample_nearest", self.shape)
        data = np.repeat(np.repeat(self.data, factor, axis=-3), factor, axis=-2)
        out = Tensor._result(data, (self,), "upsample_nearest")
        if out.requires_grad:
            def _backward():
                *lead, h, w, c = out.grad.shape
                g = out.grad.reshape(*lead, h // factor, factor, w // factor, factor, c)
                self._accumulate(g.sum(axis=(-4, -2)))
            out._backward = _backward
        return out

    def avg_pool2d(self, factor: int) -> "Tensor":
        *lead, h, w, c = self.shape
        if self.ndim < 3 or h % factor or w % factor:
            raise ShapeError(f"avg_pool2d(factor={factor})", self.shape)
        blocks = self.data.reshape(*lead, h // factor, factor, w // factor, factor, c)
        out = Tensor._result(blocks.mean(axis=(-4, -2)), (self,), "avg_pool2d")
        if out.requires_grad:
            def _backward():
                g = np.repeat(np.repeat(out.grad, factor, axis=-3), factor, axis=-2)
                self._accumulate(g / (factor * factor))
            out._backward = _backward
        return out


# -- free functions ------------------------------------------------------


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = list(tensors)
    if not tensors:
        raise ShapeError("concat", ())
    ref = tensors[0].shape
    for t in tensors[1:]:
        if len(t.shape) != len(ref) or any(
            i != (axis % len(ref)) and a != b for i, (a, b) in enumerate(zip(t.shape, ref))
        ):
            raise ShapeError("concat", ref, t.shape)
    out = Tensor._result(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), "concat")
    if out.requires_grad:
        sizes = [t.shape[axis] for t in tensors]
        def _backward():
            start = 0
            for t, n in zip(tensors, sizes):
                if t.requires_grad:
                    sl = [slice(None)] * out.grad.ndim
                    sl[axis] = slice(start, start + n)
                    t._accumulate(out.grad[tuple(sl)])
                start += n
        out._backward = _backward
    return out


def maximum(a: Tensor, b) -> Tensor:
    b = a._coerce(b)
    _broadcast_check("maximum", a.shape, b.shape)
    out = Tensor._result(np.maximum(a.data, b.data), (a, b), "maximum")
    if out.requires_grad:
        def _backward():
            take_a = a.data >= b.data  # ties route to the first argument
            if a.requires_grad:
                a._accumulate(_unbroadcast(out.grad * take_a, a.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(out.grad * ~take_a, b.shape))
        out._backward = _backward
    return out


def minimum(a: Tensor, b) -> Tensor:
    b = a._coerce(b)
    _broadcast_check("minimum", a.shape, b.shape)
    out = Tensor._result(np.minimum(a.data, b.data), (a, b), "minimum")
    if out.requires_grad:
        def _backward():
            take_a = a.data <= b.data
            if a.requires_grad:
                a._accumulate(_unbroadcast(out.grad * take_a, a.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(out.grad * ~take_a, b.shape))
        out._backward = _backward
    return out


def zeros(shape, requires_grad: bool = False, dtype=np.float64) -> Tensor:
    return Tensor(np.zeros(shape, dtype=dtype), requires_grad=requires_grad)


def ones(shape, requires_grad: bool = False, dtype=np.float64) -> Tensor:
    return Tensor(np.ones(shape, dtype=dtype), requires_grad=requires_grad)
