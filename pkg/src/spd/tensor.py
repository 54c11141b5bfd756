"""Dense float64 tensors with tape-based reverse-mode differentiation.

Design notes:

* Everything is float64.  The gradient checks in the test suite compare
  analytic gradients against central finite differences at 1e-5 relative
  error, which is only comfortable at double precision.
* Operations record onto a single module-level tape.  Creation order is
  a topological order of the graph, so the backward pass is one reverse
  sweep that touches each node exactly once.  Call :func:`reset_tape`
  (or use :class:`no_grad` around evaluation-only work) once per
  training step to keep the tape from growing.
* Array storage and matmul are delegated to numpy; reductions inside a
  single op use numpy's deterministic pairwise summation, so repeated
  runs on the same machine are bit-identical.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf

from .errors import ContractError, NumericError, ShapeError

LAYER_NORM_EPS = 1e-5

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)


class Tensor:
    """A dense float64 array plus an optional gradient buffer."""

    __slots__ = ("data", "grad", "requires_grad", "tape_id")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self.tape_id = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a scalar, got shape {self.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self):
        self.grad = None

    def detach(self) -> "Tensor":
        """Same storage, cut off from the tape."""
        return Tensor(self.data)

    def backward(self):
        backward(self)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return scale(self, -1.0)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


# ---------------------------------------------------------------------------
# Tape machinery


class _Node:
    __slots__ = ("out", "parents", "backward")

    def __init__(self, out, parents, backward):
        self.out = out
        self.parents = parents
        self.backward = backward


_tape: list[_Node] = []
_grad_enabled: bool = True


def reset_tape():
    """Drop all recorded nodes. Call once per optimization step."""
    _tape.clear()


def tape_size() -> int:
    return len(_tape)


class no_grad:
    """Context manager: ops inside do not record onto the tape."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


def _record(data, parents, backward_fn) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out.tape_id = len(_tape)
        _tape.append(_Node(out, tuple(parents), backward_fn))
    return out


def _accum(t: Tensor, g: np.ndarray):
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum gradient g down to `shape` after numpy broadcasting."""
    if g.shape == tuple(shape):
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, d in enumerate(shape) if d == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def backward(loss: Tensor):
    """Reverse sweep from a scalar loss; accumulates into .grad buffers."""
    if loss.data.size != 1:
        raise ContractError(f"backward() needs a scalar loss, got shape {loss.shape}")
    if loss.tape_id is None:
        raise ContractError("loss is not on the active tape (nothing to differentiate)")
    needed = bytearray(loss.tape_id + 1)
    needed[loss.tape_id] = 1
    for idx in range(loss.tape_id, -1, -1):
        if not needed[idx]:
            continue
        for p in _tape[idx].parents:
            if p.tape_id is not None:
                needed[p.tape_id] = 1
    loss.grad = np.ones_like(loss.data)
    for idx in range(loss.tape_id, -1, -1):
        if needed[idx]:
            node = _tape[idx]
            node.backward(node.out.grad)


# ---------------------------------------------------------------------------
# Arithmetic ops


def add(a: Tensor, b: Tensor) -> Tensor:
    data = a.data + b.data

    def bw(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g, a.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(g, b.shape))

    return _record(data, (a, b), bw)


def sub(a: Tensor, b: Tensor) -> Tensor:
    data = a.data - b.data

    def bw(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g, a.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(-g, b.shape))

    return _record(data, (a, b), bw)


def mul(a: Tensor, b: Tensor) -> Tensor:
    data = a.data * b.data

    def bw(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(g * a.data, b.shape))

    return _record(data, (a, b), bw)


def scale(a: Tensor, s: float) -> Tensor:
    data = a.data * s

    def bw(g):
        if a.requires_grad:
            _accum(a, g * s)

    return _record(data, (a,), bw)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs >=2-d operands, got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dimensions disagree: {a.shape} @ {b.shape}")
    data = a.data @ b.data

    def bw(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape))

    return _record(data, (a, b), bw)


def transpose(a: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    data = np.transpose(a.data, axes)
    inv = np.argsort(axes)

    def bw(g):
        if a.requires_grad:
            _accum(a, np.transpose(g, inv))

    return _record(data, (a,), bw)


def reshape(a: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    data = a.data.reshape(shape)
    orig = a.shape

    def bw(g):
        if a.requires_grad:
            _accum(a, g.reshape(orig))

    return _record(data, (a,), bw)


def sum_(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        if not a.requires_grad:
            return
        if axis is None:
            _accum(a, np.broadcast_to(g, a.shape).copy())
        else:
            gg = g if keepdims else np.expand_dims(g, axis)
            _accum(a, np.broadcast_to(gg, a.shape).copy())

    return _record(data, (a,), bw)


def mean_(a: Tensor) -> Tensor:
    return scale(sum_(a), 1.0 / a.size)


# ---------------------------------------------------------------------------
# Neural-net ops


def mse(a: Tensor, b: Tensor) -> Tensor:
    """Mean over all elements of (a - b)^2; differentiable w.r.t. both."""
    if a.shape != b.shape:
        raise ShapeError(f"mse needs identical shapes, got {a.shape} vs {b.shape}")
    diff = a.data - b.data
    data = np.mean(diff * diff)
    n = a.size

    def bw(g):
        coeff = (2.0 / n) * g
        if a.requires_grad:
            _accum(a, coeff * diff)
        if b.requires_grad:
            _accum(b, -coeff * diff)

    return _record(data, (a, b), bw)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    """Probabilities along `axis`, computed with max-subtraction."""
    x = a.data
    if not np.all(np.isfinite(x)):
        raise NumericError("softmax input contains NaN or inf")
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        if a.requires_grad:
            inner = (g * y).sum(axis=axis, keepdims=True)
            _accum(a, y * (g - inner))

    return _record(y, (a,), bw)


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    x = a.data
    if not np.all(np.isfinite(x)):
        raise NumericError("log_softmax input contains NaN or inf")
    shifted = x - x.max(axis=axis, keepdims=True)
    logZ = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    data = shifted - logZ

    def bw(g):
        if a.requires_grad:
            _accum(a, g - np.exp(data) * g.sum(axis=axis, keepdims=True))

    return _record(data, (a,), bw)


def gelu(a: Tensor) -> Tensor:
    """Exact Gaussian-error-function form: 0.5 x (1 + erf(x / sqrt(2)))."""
    x = a.data
    cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))
    data = x * cdf

    def bw(g):
        if a.requires_grad:
            pdf = np.exp(-0.5 * x * x) * _INV_SQRT2PI
            _accum(a, g * (cdf + x * pdf))

    return _record(data, (a,), bw)


def layer_norm(a: Tensor, gain: Tensor, bias: Tensor, eps: float = LAYER_NORM_EPS) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then affine."""
    d = a.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError(
            f"layer_norm affine params must have shape ({d},), got {gain.shape} and {bias.shape}"
        )
    x = a.data
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv_std
    data = xhat * gain.data + bias.data

    def bw(g):
        if gain.requires_grad:
            _accum(gain, (g * xhat).reshape(-1, d).sum(axis=0))
        if bias.requires_grad:
            _accum(bias, g.reshape(-1, d).sum(axis=0))
        if a.requires_grad:
            gx = g * gain.data
            term1 = gx.sum(axis=-1, keepdims=True)
            term2 = (gx * xhat).sum(axis=-1, keepdims=True)
            _accum(a, inv_std * (gx - (term1 + xhat * term2) / d))

    return _record(data, (a, gain, bias), bw)


def embedding(table: Tensor, ids: np.ndarray) -> Tensor:
    """Row gather out of an embedding table; scatter-add on the way back."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.min(initial=0) < 0 or ids.max(initial=0) >= table.shape[0]:
        raise ShapeError(
            f"embedding ids out of range [0, {table.shape[0]}): "
            f"min={ids.min()}, max={ids.max()}"
        )
    data = table.data[ids]
    d = table.shape[1]

    def bw(g):
        if table.requires_grad:
            if table.grad is None:
                table.grad = np.zeros_like(table.data)
            np.add.at(table.grad, ids.reshape(-1), g.reshape(-1, d))

    return _record(data, (table,), bw)
