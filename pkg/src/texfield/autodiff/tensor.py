"""Dense tensors with define-by-run reverse-mode differentiation.

Every operation on a :class:`Tensor` that has a gradient-requiring operand
records a closure mapping the output gradient to operand gradients. Calling
:meth:`Tensor.backward` on a scalar walks that tape in reverse topological
order. The tape is rebuilt on every forward pass.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np

from texfield.errors import ContractError, DimensionError, DomainError, NumericError

DEFAULT_DTYPE = np.float32

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (inference, metrics)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def is_grad_enabled() -> bool:
    return _GRAD_ENABLED


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _broadcast_shape(a: np.ndarray, b: np.ndarray, op: str) -> tuple:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(
            f"{op}: shapes {tuple(a.shape)} and {tuple(b.shape)} do not broadcast"
        ) from None


def _is_basic_index(idx) -> bool:
    items = idx if isinstance(idx, tuple) else (idx,)
    return all(
        isinstance(i, (int, np.integer, slice)) or i is None or i is Ellipsis
        for i in items
    )


class Tensor:
    """An n-dimensional array node in the differentiation graph.

    Args:
        data: array-like values; non-float input is cast to ``DEFAULT_DTYPE``.
        requires_grad: whether gradients should be accumulated into ``grad``.
        dtype: optional explicit floating dtype.
        name: optional label used in error messages and checkpoints.
    """

    __array_priority__ = 1000  # make ndarray <op> Tensor defer to Tensor

    def __init__(self, data, requires_grad: bool = False, dtype=None, name: str | None = None):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(DEFAULT_DTYPE)
        self.data: np.ndarray = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.name = name
        self._parents: tuple = ()
        self._backward: Callable | None = None

    # -- basic properties -------------------------------------------------
    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return self._backward is None

    def __repr__(self) -> str:
        tag = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad}{tag})"

    def __len__(self) -> int:
        return len(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else self.data.item()

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def check_finite(self, what: str | None = None) -> "Tensor":
        """Raise :class:`NumericError` if any value is NaN or infinite."""
        if not np.all(np.isfinite(self.data)):
            label = what or self.name or "tensor"
            bad = int(np.size(self.data) - np.count_nonzero(np.isfinite(self.data)))
            raise NumericError(f"{label} has {bad} non-finite value(s)")
        return self

    # -- graph construction ----------------------------------------------
    @staticmethod
    def _make(data: np.ndarray, parents: Sequence["Tensor"], backward: Callable) -> "Tensor":
        out = Tensor(data)
        if _GRAD_ENABLED and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        return out

    def _wrap(self, other) -> "Tensor":
        if isinstance(other, Tensor):
            return other
        return Tensor(np.asarray(other, dtype=self.data.dtype))

    def backward(self, grad=None) -> None:
        """Populate ``grad`` on every reachable leaf that requires gradients.

        Gradients accumulate across calls until :meth:`zero_grad` is called.
        """
        if not self.requires_grad:
            raise ContractError("backward() called on a tensor that is detached from any graph")
        if grad is None:
            if self.data.size != 1:
                raise ContractError(
                    f"backward() needs a scalar loss, got shape {tuple(self.shape)}"
                )
            grad = np.ones_like(self.data)
        else:
            grad = np.asarray(grad, dtype=self.data.dtype).reshape(self.shape)

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
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))

        grads: dict[int, np.ndarray] = {id(self): grad}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                g = g.astype(node.data.dtype, copy=False)
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for p, pg in zip(node._parents, node._backward(g)):
                if pg is None or not p.requires_grad:
                    continue
                key = id(p)
                grads[key] = pg if key not in grads else grads[key] + pg

    # -- elementwise arithmetic ------------------------------------------
    def __add__(self, other):
        other = self._wrap(other)
        _broadcast_shape(self.data, other.data, "add")
        a_shape, b_shape = self.shape, other.shape

        def bw(g):
            return _unbroadcast(g, a_shape), _unbroadcast(g, b_shape)

        return Tensor._make(self.data + other.data, (self, other), bw)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._wrap(other)
        _broadcast_shape(self.data, other.data, "sub")
        a_shape, b_shape = self.shape, other.shape

        def bw(g):
            return _unbroadcast(g, a_shape), _unbroadcast(-g, b_shape)

        return Tensor._make(self.data - other.data, (self, other), bw)

    def __rsub__(self, other):
        return self._wrap(other) - self

    def __mul__(self, other):
        other = self._wrap(other)
        _broadcast_shape(self.data, other.data, "mul")
        a, b = self.data, other.data

        def bw(g):
            return _unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)

        return Tensor._make(a * b, (self, other), bw)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._wrap(other)
        _broadcast_shape(self.data, other.data, "div")
        a, b = self.data, other.data

        def bw(g):
            return _unbroadcast(g / b, a.shape), _unbroadcast(-g * a / (b * b), b.shape)

        return Tensor._make(a / b, (self, other), bw)

    def __rtruediv__(self, other):
        return self._wrap(other) / self

    def __neg__(self):
        return Tensor._make(-self.data, (self,), lambda g: (-g,))

    def __pow__(self, exponent: float):
        if isinstance(exponent, Tensor):
            raise ContractError("only constant exponents are supported")
        a = self.data
        p = float(exponent)

        def bw(g):
            return (g * p * a ** (p - 1.0),)

        return Tensor._make(a**p, (self,), bw)

    def square(self):
        a = self.data
        return Tensor._make(a * a, (self,), lambda g: (2.0 * g * a,))

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        if isinstance(idx, Tensor):
            idx = idx.data.astype(np.intp)
        shape, dtype = self.shape, self.dtype
        basic = _is_basic_index(idx)

        def bw(g):
            out = np.zeros(shape, dtype=dtype)
            if basic:
                out[idx] += g
            else:
                np.add.at(out, idx, g)
            return (out,)

        return Tensor._make(self.data[idx], (self,), bw)

    # -- unary functions ---------------------------------------------------
    def relu(self):
        a = self.data
        mask = a > 0  # gradient at exactly 0 is 0

        return Tensor._make(np.where(mask, a, 0).astype(a.dtype, copy=False), (self,), lambda g: (g * mask,))

    def sigmoid(self):
        out = 0.5 * (1.0 + np.tanh(0.5 * self.data))

        return Tensor._make(out, (self,), lambda g: (g * out * (1.0 - out),))

    def exp(self):
        out = np.exp(self.data)
        return Tensor._make(out, (self,), lambda g: (g * out,))

    def log(self):
        a = self.data
        if np.any(a <= 0):
            raise DomainError("log of non-positive value")
        return Tensor._make(np.log(a), (self,), lambda g: (g / a,))

    def abs(self):
        a = self.data
        sign = np.sign(a)  # subgradient at 0 is 0
        return Tensor._make(np.abs(a), (self,), lambda g: (g * sign,))

    # -- shape manipulation ----------------------------------------------
    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        old = self.shape
        try:
            out = self.data.reshape(shape)
        except ValueError:
            raise DimensionError(f"reshape: cannot view shape {old} as {shape}") from None
        return Tensor._make(out, (self,), lambda g: (g.reshape(old),))

    def flatten(self, start: int = 1):
        return self.reshape(self.shape[:start] + (-1,))

    @property
    def T(self):
        return self.transpose()

    def transpose(self, *axes):
        axes = axes or tuple(reversed(range(self.ndim)))
        inv = tuple(np.argsort(axes))
        return Tensor._make(self.data.transpose(axes), (self,), lambda g: (g.transpose(inv),))

    def broadcast_to(self, shape):
        old = self.shape
        try:
            out = np.broadcast_to(self.data, shape)
        except ValueError:
            raise DimensionError(f"broadcast_to: shape {old} cannot broadcast to {tuple(shape)}") from None
        return Tensor._make(out, (self,), lambda g: (_unbroadcast(g, old),))

    # -- reductions -------------------------------------------------------
    def _check_axis(self, axis, op):
        if axis is None:
            if self.data.size == 0:
                raise DomainError(f"{op} over an empty tensor")
            return
        axes = axis if isinstance(axis, tuple) else (axis,)
        for ax in axes:
            if not -self.ndim <= ax < self.ndim:
                raise DimensionError(f"{op}: axis {ax} out of range for shape {self.shape}")
            if self.shape[ax] == 0:
                raise DomainError(f"{op} over empty axis {ax} of shape {self.shape}")

    def sum(self, axis=None, keepdims: bool = False):
        self._check_axis(axis, "sum")
        shape = self.shape
        out = self.data.sum(axis=axis, keepdims=keepdims)

        def bw(g):
            if not keepdims and axis is not None:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape),)

        return Tensor._make(np.asarray(out), (self,), bw)

    def mean(self, axis=None, keepdims: bool = False):
        self._check_axis(axis, "mean")
        if axis is None:
            count = self.data.size
        else:
            axes = axis if isinstance(axis, tuple) else (axis,)
            count = int(np.prod([self.shape[a] for a in axes]))
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    def max(self, axis=None, keepdims: bool = False):
        """Max-reduction; ties split the gradient evenly among the maxima."""
        self._check_axis(axis, "max")
        a = self.data
        out_k = a.max(axis=axis, keepdims=True)
        mask = (a == out_k).astype(a.dtype)
        mask /= mask.sum(axis=axis, keepdims=True)
        out = out_k if keepdims else np.asarray(a.max(axis=axis))

        def bw(g):
            if not keepdims:
                g = g.reshape(out_k.shape)
            return (mask * g,)

        return Tensor._make(out, (self,), bw)

    def astype(self, dtype) -> "Tensor":
        """Return a differentiable copy in another floating dtype."""
        src = self.dtype
        return Tensor._make(self.data.astype(dtype), (self,), lambda g: (g.astype(src),))


# -- free functions ----------------------------------------------------------


def tensor(data, requires_grad: bool = False, dtype=None) -> Tensor:
    return Tensor(data, requires_grad=requires_grad, dtype=dtype)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product; ``a`` may carry leading batch axes when ``b`` is 2-D."""
    a = a if isinstance(a, Tensor) else Tensor(a)
    b = b if isinstance(b, Tensor) else Tensor(b, dtype=a.dtype)
    A, B = a.data, b.data
    if A.ndim < 1 or B.ndim < 1 or A.shape[-1] != B.shape[-2 if B.ndim > 1 else 0]:
        raise DimensionError(f"matmul: shapes {tuple(A.shape)} and {tuple(B.shape)} do not conform")
    if B.ndim != 2 or A.ndim < 2:
        if A.ndim != B.ndim:
            raise DimensionError(f"matmul: unsupported operand ranks {A.ndim} and {B.ndim}")

    def bw(g):
        if B.ndim == 2 and A.ndim >= 2:
            ga = g @ B.T
            gb = A.reshape(-1, A.shape[-1]).T @ g.reshape(-1, B.shape[-1])
            return ga, gb
        ga = g @ np.swapaxes(B, -1, -2)
        gb = np.swapaxes(A, -1, -2) @ g
        return _unbroadcast(ga, A.shape), _unbroadcast(gb, B.shape)

    return Tensor._make(A @ B, (a, b), bw)


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Affine map ``x @ weight + bias`` over the last axis of ``x``."""
    if x.shape[-1] != weight.shape[0]:
        raise DimensionError(
            f"linear: input shape {tuple(x.shape)} does not match weight shape {tuple(weight.shape)}"
        )
    X, W = x.data, weight.data
    out = X @ W
    if bias is not None:
        out = out + bias.data
    parents = (x, weight) if bias is None else (x, weight, bias)

    def bw(g):
        gx = g @ W.T if x.requires_grad else None
        gw = X.reshape(-1, X.shape[-1]).T @ g.reshape(-1, W.shape[1]) if weight.requires_grad else None
        if bias is None:
            return gx, gw
        gb = g.reshape(-1, W.shape[1]).sum(axis=0) if bias.requires_grad else None
        return gx, gw, gb

    return Tensor._make(out, parents, bw)


def concat(tensors: Iterable[Tensor], axis: int = -1) -> Tensor:
    """Concatenate along ``axis`` (the feature axis by default)."""
    ts = [t if isinstance(t, Tensor) else Tensor(t) for t in tensors]
    if not ts:
        raise ContractError("concat of an empty sequence")
    ref = ts[0].shape
    ax = axis % len(ref) if ref else 0
    for t in ts[1:]:
        if t.ndim != len(ref) or any(
            i != ax and t.shape[i] != ref[i] for i in range(len(ref))
        ):
            raise DimensionError(f"concat: shapes {ref} and {tuple(t.shape)} differ off axis {axis}")
    sizes = [t.shape[ax] for t in ts]
    splits = np.cumsum(sizes)[:-1]
    out = np.concatenate([t.data for t in ts], axis=ax)

    def bw(g):
        return tuple(np.split(g, splits, axis=ax))

    return Tensor._make(out, ts, bw)


def relu(x: Tensor) -> Tensor:
    return x.relu()


def sigmoid(x: Tensor) -> Tensor:
    return x.sigmoid()


def exp(x: Tensor) -> Tensor:
    return x.exp()


def zeros(shape, requires_grad: bool = False, dtype=DEFAULT_DTYPE) -> Tensor:
    return Tensor(np.zeros(shape, dtype=dtype), requires_grad=requires_grad)


def ones(shape, requires_grad: bool = False, dtype=DEFAULT_DTYPE) -> Tensor:
    return Tensor(np.ones(shape, dtype=dtype), requires_grad=requires_grad)
