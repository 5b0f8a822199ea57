"""Dense tensors with reverse-mode automatic differentiation.

Values are numpy arrays (float32 for training, float64 for gradient
checks). Every operation that sees a gradient-tracking input records a
backward closure on its output; ``backward`` seeds the loss gradient and
walks the DAG once in reverse topological order, accumulating into
``.grad`` along the way. Tensor values are immutable after construction
except for the optimizer's in-place parameter updates, which happen
strictly between graph constructions.
"""

from __future__ import annotations

import builtins
from typing import Callable, Iterable

import numpy as np

from deskvoice.errors import ContractError, ShapeError

_GRAD_ENABLED = True


def grad_enabled() -> bool:
    return _GRAD_ENABLED


class no_grad:
    """Context manager that disables graph recording (inference paths)."""

    def __enter__(self):
        global _GRAD_ENABLED
        self._prev = _GRAD_ENABLED
        _GRAD_ENABLED = False
        return self

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._prev
        return False


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn", "_op")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        dtype=None,
        _parents: tuple["Tensor", ...] = (),
        _backward_fn: Callable[[np.ndarray], None] | None = None,
        _op: str = "",
    ):
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents = _parents
        self._backward_fn = _backward_fn
        self._op = _op

    @property
    def shape(self) -> tuple[int, ...]:
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
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def __repr__(self) -> str:
        op = f" op={self._op}" if self._op else ""
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}{op})"

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> dict["Tensor", np.ndarray]:
        return backward(self)

    # operators ---------------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(other, mul(self, -1.0))

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return mul(self, power(other, -1.0))
        return mul(self, 1.0 / other)

    def __rtruediv__(self, other):
        return mul(other, power(self, -1.0))

    def __neg__(self):
        return mul(self, -1.0)

    def __pow__(self, exponent: float):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return take_slice(self, index)

    def sum(self, axis=None, keepdims=False):
        return sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)


def tensor(data, requires_grad: bool = False, dtype=None) -> Tensor:
    return Tensor(data, requires_grad=requires_grad, dtype=dtype)


class ComputationGraph:
    """Recorded operations reachable from one output, in topological order."""

    def __init__(self, nodes: list[Tensor], output: Tensor):
        self.nodes = nodes
        self.output = output

    @classmethod
    def trace(cls, output: Tensor) -> "ComputationGraph":
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(output, False)]
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
        return cls(order, output)


def backward(loss: Tensor, params: Iterable[Tensor] | None = None) -> dict[Tensor, np.ndarray]:
    """Reverse-mode sweep from a scalar loss.

    Returns a map from every gradient-tracking leaf encountered to its
    gradient (also stored on ``.grad``). Parameters listed in ``params``
    that sit on no path to the loss are reported with a zero gradient.
    """
    if loss.size != 1:
        raise ContractError(f"backward expects a scalar loss, got shape {loss.shape}")

    graph = ComputationGraph.trace(loss)
    if loss.grad is None:
        loss.grad = np.ones_like(loss.data)
    else:
        loss.grad = loss.grad + np.ones_like(loss.data)

    leaf_grads: dict[Tensor, np.ndarray] = {}
    for node in reversed(graph.nodes):
        if node.grad is None:
            continue
        if node._backward_fn is not None:
            node._backward_fn(node.grad)
        elif node.requires_grad:
            leaf_grads[node] = node.grad

    if params is not None:
        for p in params:
            if p not in leaf_grads:
                if p.grad is None:
                    p.grad = np.zeros_like(p.data)
                leaf_grads[p] = p.grad
    return leaf_grads


# -- op plumbing ---------------------------------------------------------------


def _coerce(x, like: Tensor | None = None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    dtype = like.data.dtype if like is not None else None
    return Tensor(np.asarray(x), dtype=dtype)


def _tracking(*tensors: Tensor) -> bool:
    return _GRAD_ENABLED and any(t.requires_grad for t in tensors)


def _make(data, parents, backward_fn, op: str) -> Tensor:
    return Tensor(data, requires_grad=True, _parents=parents, _backward_fn=backward_fn, _op=op)


def _accumulate(t: Tensor, grad: np.ndarray) -> None:
    if t.grad is None:
        t.grad = np.ascontiguousarray(grad, dtype=t.data.dtype)
    else:
        t.grad = t.grad + grad


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` to undo numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# -- elementwise and reduction ops ----------------------------------------------


def add(a, b) -> Tensor:
    a = _coerce(a)
    b = _coerce(b, like=a)
    out = a.data + b.data
    if not _tracking(a, b):
        return Tensor(out)

    def backward_fn(grad):
        if a.requires_grad:
            _accumulate(a, _unbroadcast(grad, a.data.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(grad, b.data.shape))

    return _make(out, (a, b), backward_fn, "add")


def mul(a, b) -> Tensor:
    a = _coerce(a)
    b = _coerce(b, like=a)
    out = a.data * b.data
    if not _tracking(a, b):
        return Tensor(out)

    def backward_fn(grad):
        if a.requires_grad:
            _accumulate(a, _unbroadcast(grad * b.data, a.data.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(grad * a.data, b.data.shape))

    return _make(out, (a, b), backward_fn, "mul")


def power(a, exponent: float) -> Tensor:
    a = _coerce(a)
    out = a.data**exponent
    if not _tracking(a):
        return Tensor(out)

    def backward_fn(grad):
        _accumulate(a, grad * exponent * a.data ** (exponent - 1.0))

    return _make(out, (a,), backward_fn, "pow")


def exp(a) -> Tensor:
    a = _coerce(a)
    out = np.exp(a.data)
    if not _tracking(a):
        return Tensor(out)

    def backward_fn(grad):
        _accumulate(a, grad * out)

    return _make(out, (a,), backward_fn, "exp")


def log(a) -> Tensor:
    a = _coerce(a)
    out = np.log(a.data)
    if not _tracking(a):
        return Tensor(out)

    def backward_fn(grad):
        _accumulate(a, grad / a.data)

    return _make(out, (a,), backward_fn, "log")


def sqrt(a) -> Tensor:
    a = _coerce(a)
    out = np.sqrt(a.data)
    if not _tracking(a):
        return Tensor(out)

    def backward_fn(grad):
        _accumulate(a, grad * 0.5 / out)

    return _make(out, (a,), backward_fn, "sqrt")


def tanh(a) -> Tensor:
    a = _coerce(a)
    out = np.tanh(a.data)
    if not _tracking(a):
        return Tensor(out)

    def backward_fn(grad):
        _accumulate(a, grad * (1.0 - out * out))

    return _make(out, (a,), backward_fn, "tanh")


def sigmoid(a) -> Tensor:
    a = _coerce(a)
    # Stable piecewise evaluation.
    x = a.data
    out = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    out = out.astype(x.dtype)
    if not _tracking(a):
        return Tensor(out)

    def backward_fn(grad):
        _accumulate(a, grad * out * (1.0 - out))

    return _make(out, (a,), backward_fn, "sigmoid")


def silu(a) -> Tensor:
    a = _coerce(a)
    x = a.data
    sig = 1.0 / (1.0 + np.exp(-x))
    out = x * sig
    if not _tracking(a):
        return Tensor(out)

    def backward_fn(grad):
        _accumulate(a, grad * (sig * (1.0 + x * (1.0 - sig))))

    return _make(out, (a,), backward_fn, "silu")


def absolute(a) -> Tensor:
    a = _coerce(a)
    out = np.abs(a.data)
    if not _tracking(a):
        return Tensor(out)

    sign = np.sign(a.data)

    def backward_fn(grad):
        _accumulate(a, grad * sign)

    return _make(out, (a,), backward_fn, "abs")


def sum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _coerce(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)
    if not _tracking(a):
        return Tensor(out)

    def backward_fn(grad):
        g = grad
        if axis is not None and not keepdims:
            axes = axis if isinstance(axis, tuple) else (axis,)
            g = np.expand_dims(g, tuple(ax % a.data.ndim for ax in axes))
        _accumulate(a, np.broadcast_to(g, a.data.shape))

    return _make(out, (a,), backward_fn, "sum")


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _coerce(a)
    if axis is None:
        count = a.data.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        count = int(np.prod([a.data.shape[ax] for ax in axes]))
    return sum(a, axis=axis, keepdims=keepdims) * (1.0 / count)


# -- shape ops -------------------------------------------------------------------


def reshape(a, shape: tuple[int, ...]) -> Tensor:
    a = _coerce(a)
    out = a.data.reshape(shape)
    if not _tracking(a):
        return Tensor(out)

    def backward_fn(grad):
        _accumulate(a, grad.reshape(a.data.shape))

    return _make(out, (a,), backward_fn, "reshape")


def transpose(a, axes: tuple[int, ...] | None = None) -> Tensor:
    a = _coerce(a)
    out = np.transpose(a.data, axes)
    if not _tracking(a):
        return Tensor(out)

    if axes is None:
        inverse = None
    else:
        inverse = tuple(np.argsort(axes))

    def backward_fn(grad):
        _accumulate(a, np.transpose(grad, inverse))

    return _make(out, (a,), backward_fn, "transpose")


def swap_last2(a) -> Tensor:
    a = _coerce(a)
    axes = list(range(a.data.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return transpose(a, tuple(axes))


def concat(tensors, axis: int = 0) -> Tensor:
    ts = [_coerce(t) for t in tensors]
    out = np.concatenate([t.data for t in ts], axis=axis)
    if not _tracking(*ts):
        return Tensor(out)

    sizes = [t.data.shape[axis] for t in ts]
    offsets = np.cumsum(sizes)[:-1]

    def backward_fn(grad):
        pieces = np.split(grad, offsets, axis=axis)
        for t, piece in zip(ts, pieces):
            if t.requires_grad:
                _accumulate(t, piece)

    return _make(out, tuple(ts), backward_fn, "concat")


def take_slice(a, index) -> Tensor:
    a = _coerce(a)
    out = a.data[index]
    if not _tracking(a):
        return Tensor(out)

    def backward_fn(grad):
        full = np.zeros_like(a.data)
        np.add.at(full, index, grad)
        _accumulate(a, full)

    return _make(out, (a,), backward_fn, "slice")


def pad_time(a, left: int, right: int, axis: int = 1) -> Tensor:
    """Zero-pad along one axis (used for causal left padding)."""
    a = _coerce(a)
    if left == 0 and right == 0:
        return a
    widths = [(0, 0)] * a.data.ndim
    widths[axis] = (left, right)
    out = np.pad(a.data, widths)
    if not _tracking(a):
        return Tensor(out)

    sl = [slice(None)] * a.data.ndim
    sl[axis] = slice(left, left + a.data.shape[axis])
    sl = tuple(sl)

    def backward_fn(grad):
        _accumulate(a, grad[sl])

    return _make(out, (a,), backward_fn, "pad")


def embedding_lookup(table, ids: np.ndarray) -> Tensor:
    """Row gather ``table[ids]`` with scatter-add backward."""
    table = _coerce(table)
    ids = np.asarray(ids)
    out = table.data[ids]
    if not _tracking(table):
        return Tensor(out)

    def backward_fn(grad):
        full = np.zeros_like(table.data)
        np.add.at(full, ids, grad)
        _accumulate(table, full)

    return _make(out, (table,), backward_fn, "embedding")


# -- linear algebra ----------------------------------------------------------------


def matmul(a, b) -> Tensor:
    a = _coerce(a)
    b = _coerce(b, like=a)
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ShapeError(f"matmul expects >=2-D operands, got {a.shape} @ {b.shape}")
    if a.data.shape[-1] != b.data.shape[-2]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")
    out = a.data @ b.data
    if not _tracking(a, b):
        return Tensor(out)

    def backward_fn(grad):
        if a.requires_grad:
            ga = grad @ np.swapaxes(b.data, -1, -2)
            _accumulate(a, _unbroadcast(ga, a.data.shape))
        if b.requires_grad:
            gb = np.swapaxes(a.data, -1, -2) @ grad
            _accumulate(b, _unbroadcast(gb, b.data.shape))

    return _make(out, (a, b), backward_fn, "matmul")


# -- softmax family ------------------------------------------------------------------


def softmax(a, axis: int = -1) -> Tensor:
    a = _coerce(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)
    if not _tracking(a):
        return Tensor(out)

    def backward_fn(grad):
        inner = (grad * out).sum(axis=axis, keepdims=True)
        _accumulate(a, out * (grad - inner))

    return _make(out, (a,), backward_fn, "softmax")


def log_softmax(a, axis: int = -1) -> Tensor:
    a = _coerce(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    logsumexp = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - logsumexp
    if not _tracking(a):
        return Tensor(out)

    soft = np.exp(out)

    def backward_fn(grad):
        _accumulate(a, grad - soft * grad.sum(axis=axis, keepdims=True))

    return _make(out, (a,), backward_fn, "log_softmax")


def cross_entropy(logits, targets: np.ndarray) -> Tensor:
    """Mean negative log-likelihood of integer ``targets`` under ``logits``.

    ``logits`` is [N, V]; ``targets`` is [N] of ids in [0, V).
    """
    logits = _coerce(logits)
    targets = np.asarray(targets)
    if logits.data.ndim != 2 or targets.ndim != 1 or targets.shape[0] != logits.data.shape[0]:
        raise ShapeError(
            f"cross_entropy expects logits [N, V] and targets [N], got {logits.shape} and {targets.shape}"
        )
    n = logits.data.shape[0]
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logprobs = shifted - logsumexp
    out = -logprobs[np.arange(n), targets].mean()
    if not _tracking(logits):
        return Tensor(np.asarray(out, dtype=logits.data.dtype))

    soft = np.exp(logprobs)

    def backward_fn(grad):
        g = soft.copy()
        g[np.arange(n), targets] -= 1.0
        _accumulate(logits, g * (grad / n))

    return _make(np.asarray(out, dtype=logits.data.dtype), (logits,), backward_fn, "cross_entropy")
