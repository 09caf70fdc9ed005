"""Reverse-mode automatic differentiation on numpy arrays.

Every op dispatches: plain numpy in, plain numpy out; if any argument is a
``Node`` the op records itself on the implicit tape and returns a ``Node``.
This lets the same loss code serve both plain evaluation and training.

log/sqrt are applied to max(x, eps) and arccos to clamp(x, -1+eps, 1-eps);
backward computes the exact gradients of these clamped forward functions
(zero where the clamp is active).
"""

from __future__ import annotations

import numpy as np

EPS = 1e-12


class Node:
    """One value in a differentiable computation graph."""

    __slots__ = ("value", "parents", "_vjp", "grad")

    def __init__(self, value, parents=(), vjp=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.parents = parents
        self._vjp = vjp
        self.grad = None

    @property
    def shape(self):
        return self.value.shape

    def item(self):
        return float(self.value)

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

    def __pow__(self, k):
        return power(self, k)

    def __repr__(self):
        return f"Node(value={self.value!r})"


def as_node(x):
    return x if isinstance(x, Node) else Node(x)


def _any_node(*xs):
    return any(isinstance(x, Node) for x in xs)


def _unbroadcast(grad, shape):
    """Reduce a broadcast gradient back to the original operand shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


# ---------------------------------------------------------------------------
# elementwise arithmetic


def add(a, b):
    if not _any_node(a, b):
        return np.add(a, b)
    a, b = as_node(a), as_node(b)
    return Node(
        a.value + b.value,
        (a, b),
        lambda g: (_unbroadcast(g, a.value.shape), _unbroadcast(g, b.value.shape)),
    )


def sub(a, b):
    if not _any_node(a, b):
        return np.subtract(a, b)
    a, b = as_node(a), as_node(b)
    return Node(
        a.value - b.value,
        (a, b),
        lambda g: (_unbroadcast(g, a.value.shape), _unbroadcast(-g, b.value.shape)),
    )


def mul(a, b):
    if not _any_node(a, b):
        return np.multiply(a, b)
    a, b = as_node(a), as_node(b)
    return Node(
        a.value * b.value,
        (a, b),
        lambda g: (
            _unbroadcast(g * b.value, a.value.shape),
            _unbroadcast(g * a.value, b.value.shape),
        ),
    )


def div(a, b):
    if not _any_node(a, b):
        return np.divide(a, b)
    a, b = as_node(a), as_node(b)
    return Node(
        a.value / b.value,
        (a, b),
        lambda g: (
            _unbroadcast(g / b.value, a.value.shape),
            _unbroadcast(-g * a.value / (b.value * b.value), b.value.shape),
        ),
    )


def neg(a):
    if not isinstance(a, Node):
        return np.negative(a)
    return Node(-a.value, (a,), lambda g: (-g,))


def power(a, k):
    k = float(k)
    if not isinstance(a, Node):
        return np.power(a, k)
    return Node(a.value**k, (a,), lambda g: (g * k * a.value ** (k - 1.0),))


# ---------------------------------------------------------------------------
# clamped transcendentals


def exp(a):
    if not isinstance(a, Node):
        return np.exp(a)
    out_val = np.exp(a.value)
    return Node(out_val, (a,), lambda g: (g * out_val,))


def log(a, eps=EPS):
    if not isinstance(a, Node):
        return np.log(np.maximum(a, eps))
    v = a.value
    return Node(
        np.log(np.maximum(v, eps)),
        (a,),
        lambda g: (g * np.where(v > eps, 1.0 / np.maximum(v, eps), 0.0),),
    )


def sqrt(a, eps=EPS):
    if not isinstance(a, Node):
        return np.sqrt(np.maximum(a, eps))
    v = a.value
    out_val = np.sqrt(np.maximum(v, eps))
    return Node(
        out_val,
        (a,),
        lambda g: (g * np.where(v > eps, 0.5 / np.sqrt(np.maximum(v, eps)), 0.0),),
    )


def arccos(a, eps=EPS):
    if not isinstance(a, Node):
        return np.arccos(np.clip(a, -1.0 + eps, 1.0 - eps))
    v = a.value
    inside = (v > -1.0 + eps) & (v < 1.0 - eps)
    clipped = np.clip(v, -1.0 + eps, 1.0 - eps)
    return Node(
        np.arccos(clipped),
        (a,),
        lambda g: (g * np.where(inside, -1.0 / np.sqrt(1.0 - clipped * clipped), 0.0),),
    )


def _sigmoid(v):
    out = np.empty_like(v, dtype=np.float64)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return out


def sigmoid(a):
    if not isinstance(a, Node):
        return _sigmoid(np.asarray(a, dtype=np.float64))
    s = _sigmoid(a.value)
    return Node(s, (a,), lambda g: (g * s * (1.0 - s),))


def relu(a):
    if not isinstance(a, Node):
        return np.maximum(a, 0.0)
    v = a.value
    return Node(np.maximum(v, 0.0), (a,), lambda g: (g * (v > 0.0),))


def _softmax(v, axis):
    shifted = v - v.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def softmax(a, axis=-1):
    if not isinstance(a, Node):
        return _softmax(np.asarray(a, dtype=np.float64), axis)
    s = _softmax(a.value, axis)

    def vjp(g):
        return (s * (g - (g * s).sum(axis=axis, keepdims=True)),)

    return Node(s, (a,), vjp)


# ---------------------------------------------------------------------------
# reductions, linear algebra, indexing


def sum(a, axis=None):  # noqa: A001 - mirrors numpy naming
    if not isinstance(a, Node):
        return np.sum(a, axis=axis)
    v = a.value

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, v.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), v.shape).copy(),)

    return Node(v.sum(axis=axis), (a,), vjp)


def mean(a, axis=None):
    if not isinstance(a, Node):
        return np.mean(a, axis=axis)
    n = a.value.size if axis is None else a.value.shape[axis]
    return div(sum(a, axis=axis), float(n))


def dot(a, b):
    if not _any_node(a, b):
        return np.dot(a, b)
    a, b = as_node(a), as_node(b)
    if a.value.ndim != 1 or b.value.ndim != 1:
        raise ValueError("dot expects 1-D operands; use matvec for matrices")
    return Node(
        np.dot(a.value, b.value),
        (a, b),
        lambda g: (g * b.value, g * a.value),
    )


def matvec(w, x):
    """Apply weight matrix ``w`` (out, in) to ``x``: a vector (in,) or a
    batch (batch, in). Fused node so MLP graphs stay small."""
    if not _any_node(w, x):
        w = np.asarray(w)
        x = np.asarray(x)
        return w @ x if x.ndim == 1 else x @ w.T
    w, x = as_node(w), as_node(x)
    wv, xv = w.value, x.value
    if xv.ndim == 1:
        return Node(
            wv @ xv,
            (w, x),
            lambda g: (np.outer(g, xv), wv.T @ g),
        )
    if xv.ndim == 2:
        return Node(
            xv @ wv.T,
            (w, x),
            lambda g: (g.T @ xv, g @ wv),
        )
    raise ValueError(f"matvec expects 1-D or 2-D input, got shape {xv.shape}")


def gather(a, indices):
    """Select ``indices`` along the last axis."""
    idx = np.asarray(indices, dtype=np.intp)
    if not isinstance(a, Node):
        return np.asarray(a)[..., idx]
    v = a.value

    def vjp(g):
        full = np.zeros_like(v)
        if v.ndim == 1:
            np.add.at(full, idx, g)
        else:
            np.add.at(full, (slice(None), idx), g)
        return (full,)

    return Node(v[..., idx], (a,), vjp)


# ---------------------------------------------------------------------------
# backward pass


def topo_order(out):
    order = []
    seen = set()
    stack = [(out, False)]
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
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(out):
    """Populate ``.grad`` on every node reachable from the scalar ``out``."""
    if out.value.size != 1:
        raise ValueError(f"backward requires a scalar output, got shape {out.shape}")
    order = topo_order(out)
    for node in order:
        node.grad = None
    out.grad = np.ones_like(out.value)
    for node in reversed(order):
        if node.grad is None or node._vjp is None:
            continue
        for parent, g in zip(node.parents, node._vjp(node.grad)):
            if parent.grad is None:
                parent.grad = np.array(g, dtype=np.float64, copy=True)
            else:
                parent.grad = parent.grad + g
    return out.grad


def gradient_check(fn, point, h=1e-5):
    """Max relative error between reverse-mode and central-difference
    gradients of ``fn(params) -> scalar`` at ``point`` (list of arrays)."""
    leaves = [Node(np.asarray(p, dtype=np.float64)) for p in point]
    out = fn(leaves)
    if not np.isfinite(out.value):
        raise ValueError("non-finite forward value at the check point")
    backward(out)
    worst = 0.0
    for i, p in enumerate(point):
        p = np.asarray(p, dtype=np.float64)
        analytic = leaves[i].grad
        if analytic is None:
            analytic = np.zeros_like(p)
        flat = p.reshape(-1)
        for j in range(flat.size):
            bumped = flat.copy()
            bumped[j] += h
            plus = _eval_plain(fn, point, i, bumped.reshape(p.shape))
            bumped[j] -= 2 * h
            minus = _eval_plain(fn, point, i, bumped.reshape(p.shape))
            fd = (plus - minus) / (2 * h)
            err = abs(analytic.reshape(-1)[j] - fd) / max(1.0, abs(fd))
            worst = max(worst, err)
    return worst


def _eval_plain(fn, point, which, replacement):
    args = [Node(np.asarray(p, dtype=np.float64)) for p in point]
    args[which] = Node(replacement)
    return float(fn(args).value)
