"""Dense float64 tensors with a define-by-run tape for reverse-mode gradients.

Every operation on a :class:`Tensor` that requires gradients records its
parents and a closure mapping the output gradient to parent gradients. The
tape is rebuilt for each forward pass; :func:`backward` walks it once in
reverse topological order.
"""
from __future__ import annotations

import contextlib
import math

import numpy as np

from ..errors import DimensionError, NumericError, UsageError

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block (evaluation passes)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class _Slice:
    """Sparse gradient: ``value`` lands at ``index`` of the parent buffer."""

    __slots__ = ("index", "value", "fancy")

    def __init__(self, index, value, fancy):
        self.index = index
        self.value = value
        self.fancy = fancy


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")
    __array_priority__ = 100

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data.reshape(-1)[0])

    def __repr__(self):
        tag = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag})"

    def backward(self):
        backward(self)

    def zero_grad(self):
        self.grad = None

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __getitem__(self, index):
        return getitem(self, index)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    @property
    def T(self):
        return transpose(self, None)


class Parameter(Tensor):
    """A trainable leaf with Adam state and a freeze flag."""

    __slots__ = ("moment1", "moment2", "step_count", "_frozen")

    def __init__(self, data, name=None, frozen=False):
        super().__init__(data, requires_grad=not frozen, name=name)
        self.moment1 = np.zeros_like(self.data)
        self.moment2 = np.zeros_like(self.data)
        self.step_count = 0
        self._frozen = frozen

    @property
    def frozen(self):
        return self._frozen

    @frozen.setter
    def frozen(self, value):
        # frozen leaves drop out of the tape entirely
        self._frozen = bool(value)
        self.requires_grad = not self._frozen

    def reset_state(self):
        self.moment1 = np.zeros_like(self.data)
        self.moment2 = np.zeros_like(self.data)
        self.step_count = 0

    def __repr__(self):
        return f"Parameter(shape={self.shape}, name={self.name!r}, frozen={self._frozen})"


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, rule):
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = rule
    return out


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _broadcast_check(a, b, op):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


# elementwise binary -----------------------------------------------------------

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check(a, b, "add")
    sa, sb = a.shape, b.shape
    return _make(a.data + b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check(a, b, "sub")
    sa, sb = a.shape, b.shape
    return _make(a.data - b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check(a, b, "mul")
    ad, bd = a.data, b.data

    def rule(g):
        return (
            _unbroadcast(g * bd, ad.shape) if a.requires_grad else None,
            _unbroadcast(g * ad, bd.shape) if b.requires_grad else None,
        )

    return _make(ad * bd, (a, b), rule)


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check(a, b, "div")
    ad, bd = a.data, b.data
    out = ad / bd

    def rule(g):
        return (
            _unbroadcast(g / bd, ad.shape) if a.requires_grad else None,
            _unbroadcast(-g * out / bd, bd.shape) if b.requires_grad else None,
        )

    return _make(out, (a, b), rule)


def neg(a):
    return _make(-a.data, (a,), lambda g: (-g,))


def scale(a, c):
    """Multiply by a Python constant."""
    a = as_tensor(a)
    c = float(c)
    return _make(a.data * c, (a,), lambda g: (g * c,))


def power(a, exponent):
    a = as_tensor(a)
    p = float(exponent)
    ad = a.data
    return _make(ad ** p, (a,), lambda g: (g * p * ad ** (p - 1.0),))


def matmul(a, b):
    """Matrix product over the last two axes, batch axes broadcast."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul: shapes {a.shape} and {b.shape} are not aligned")
    ad, bd = a.data, b.data
    try:
        out = ad @ bd
    except ValueError:
        raise DimensionError(f"matmul: shapes {a.shape} and {b.shape} are not aligned") from None

    def rule(g):
        ga = _unbroadcast(g @ np.swapaxes(bd, -1, -2), ad.shape) if a.requires_grad else None
        gb = _unbroadcast(np.swapaxes(ad, -1, -2) @ g, bd.shape) if b.requires_grad else None
        return ga, gb

    return _make(out, (a, b), rule)


# elementwise unary ------------------------------------------------------------

def exp(a):
    out = np.exp(a.data)
    return _make(out, (a,), lambda g: (g * out,))


def log(a):
    ad = a.data
    return _make(np.log(ad), (a,), lambda g: (g / ad,))


def sigmoid(a):
    out = _sigmoid(a.data)
    return _make(out, (a,), lambda g: (g * out * (1.0 - out),))


def tanh(a):
    out = np.tanh(a.data)
    return _make(out, (a,), lambda g: (g * (1.0 - out * out),))


def relu(a):
    ad = a.data
    return _make(np.maximum(ad, 0.0), (a,), lambda g: (g * (ad > 0),))


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu(a):
    """Tanh approximation of GELU (smooth everywhere, unlike relu)."""
    x = a.data
    inner = _GELU_C * (x + 0.044715 * x ** 3)
    t = np.tanh(inner)
    out = 0.5 * x * (1.0 + t)

    def rule(g):
        d_inner = _GELU_C * (1.0 + 3 * 0.044715 * x * x)
        return (g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * d_inner),)

    return _make(out, (a,), rule)


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def dropout(a, p, training, rng):
    """Inverted dropout; the exact identity when ``training`` is false."""
    if not 0.0 <= p < 1.0:
        raise UsageError(f"dropout probability must lie in [0, 1), got {p}")
    if not training or p == 0.0:
        return a
    keep = (rng.random(a.shape) >= p) / (1.0 - p)
    return _make(a.data * keep, (a,), lambda g: (g * keep,))


def masked_fill(a, mask, value):
    """Replace entries where ``mask`` is true by a constant."""
    mask = np.broadcast_to(np.asarray(mask, dtype=bool), a.shape)
    out = np.where(mask, value, a.data)
    return _make(out, (a,), lambda g: (np.where(mask, 0.0, g),))


_ELEMENTWISE = {
    "add": add,
    "mul": mul,
    "sigmoid": sigmoid,
    "tanh": tanh,
    "scale": scale,
    "dropout": dropout,
}


def elementwise(kind, *inputs, **kwargs):
    try:
        fn = _ELEMENTWISE[kind]
    except KeyError:
        raise UsageError(f"unknown elementwise op {kind!r}") from None
    return fn(*inputs, **kwargs)


# reductions and shape ops -----------------------------------------------------

def _norm_axis(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(ax % ndim for ax in axis)


def tsum(a, axis=None, keepdims=False):
    shape = a.shape
    axes = _norm_axis(axis, a.ndim)
    out = a.data.sum(axis=axes, keepdims=keepdims)

    def rule(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, shape),)

    return _make(out, (a,), rule)


def mean(a, axis=None, keepdims=False):
    axes = _norm_axis(axis, a.ndim)
    n = int(np.prod([a.shape[ax] for ax in axes])) if axes else 1
    return scale(tsum(a, axis, keepdims), 1.0 / n)


def tmax(a, axis):
    """Max over one axis; the gradient goes to the first maximiser."""
    axis = axis % a.ndim
    idx = np.expand_dims(a.data.argmax(axis=axis), axis)
    out = np.take_along_axis(a.data, idx, axis=axis).squeeze(axis)
    shape = a.shape

    def rule(g):
        full = np.zeros(shape)
        np.put_along_axis(full, idx, np.expand_dims(g, axis), axis=axis)
        return (full,)

    return _make(out, (a,), rule)


def reshape(a, shape):
    old = a.shape
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise DimensionError(f"reshape: cannot view {old} as {tuple(shape)}") from None
    return _make(out, (a,), lambda g: (g.reshape(old),))


def transpose(a, axes=None):
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    inv = tuple(np.argsort(axes))
    return _make(a.data.transpose(axes), (a,), lambda g: (g.transpose(inv),))


def _is_basic(index):
    items = index if isinstance(index, tuple) else (index,)
    return all(isinstance(i, (int, np.integer, slice)) or i is None or i is Ellipsis for i in items)


def getitem(a, index):
    fancy = not _is_basic(index)
    out = a.data[index]
    if fancy:
        out = np.array(out)
    return _make(out, (a,), lambda g: (_Slice(index, g, fancy),))


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        shapes = [t.shape for t in tensors]
        raise DimensionError(f"concat: incompatible shapes {shapes} on axis {axis}") from None
    sizes = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def rule(g):
        return tuple(np.split(g, sizes, axis=axis))

    return _make(out, tuple(tensors), rule)


def stack(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.stack([t.data for t in tensors], axis=axis)
    except ValueError:
        shapes = [t.shape for t in tensors]
        raise DimensionError(f"stack: incompatible shapes {shapes}") from None
    n = len(tensors)

    def rule(g):
        return tuple(np.take(g, i, axis=axis) for i in range(n))

    return _make(out, tuple(tensors), rule)


# normalisation -----------------------------------------------------------------

def softmax(a, axis=-1):
    x = a.data
    z = np.exp(x - x.max(axis=axis, keepdims=True))
    out = z / z.sum(axis=axis, keepdims=True)

    def rule(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return _make(out, (a,), rule)


def log_softmax(a, axis=-1):
    x = a.data
    shifted = x - x.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - lse
    prob = np.exp(out)

    def rule(g):
        return (g - prob * g.sum(axis=axis, keepdims=True),)

    return _make(out, (a,), rule)


def layer_norm(a, gamma, beta, eps=1e-5):
    """Normalise over the last axis, then apply the affine ``gamma``/``beta``."""
    x = a.data
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * inv
    out = xhat * gamma.data + beta.data

    def rule(g):
        dxhat = g * gamma.data
        dx = inv * (dxhat - dxhat.mean(axis=-1, keepdims=True)
                    - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
        dgamma = _unbroadcast(g * xhat, gamma.shape) if gamma.requires_grad else None
        dbeta = _unbroadcast(g, beta.shape) if beta.requires_grad else None
        return dx, dgamma, dbeta

    return _make(out, (a, gamma, beta), rule)


# backward ------------------------------------------------------------------------

def _topo_order(root):
    order, seen = [], set()
    stack_ = [(root, False)]
    while stack_:
        node, expanded = stack_.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack_.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack_.append((p, False))
    return order


def backward(root, params=None):
    """Propagate d(root)/d(node) to every node on the tape.

    Leaf gradients accumulate into ``.grad`` (call ``zero_grad`` between
    steps). When ``params`` is given, their gradients are returned in order,
    with zeros for parameters the root does not depend on.
    """
    if root.data.size != 1:
        raise UsageError(f"backward needs a scalar root, got shape {root.shape}")
    if not root.requires_grad:
        order = []
    else:
        order = _topo_order(root)
    owned = set()
    grads = {id(root): np.ones_like(root.data)}
    owned.add(id(root))
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            if node.grad is None:
                node.grad = np.array(g, copy=True)
            else:
                node.grad = node.grad + g
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            cur = grads.get(key)
            if isinstance(pg, _Slice):
                if cur is None or key not in owned:
                    buf = np.zeros(parent.shape) if cur is None else np.array(cur, copy=True)
                    owned.add(key)
                else:
                    buf = cur
                if pg.fancy:
                    np.add.at(buf, pg.index, pg.value)
                else:
                    buf[pg.index] += pg.value
                grads[key] = buf
            elif cur is None:
                grads[key] = pg
                owned.discard(key)
            else:
                grads[key] = cur + pg
                owned.add(key)
    if params is None:
        return None
    return [np.zeros_like(p.data) if p.grad is None else p.grad for p in params]


def check_finite(t, what="value"):
    if not np.all(np.isfinite(t.data)):
        raise NumericError(f"non-finite {what} encountered")
    return t
