"""Tape-based reverse-mode automatic differentiation over float64 numpy arrays.

Operations run eagerly. While a :class:`Graph` is active (``with Graph() as g:``)
every operation that touches a gradient-requiring tensor is appended to the
graph's tape; outside a graph the same code runs as a plain forward pass.
Shapes are explicit: the only implicit broadcast is a 0-d tensor against any other.
"""

from __future__ import annotations

import threading

import numpy as np
from scipy.special import expit

DTYPE = np.float64


class ShapeError(ValueError):
    pass


class Tensor:
    __slots__ = ("value", "_grad", "requires_grad", "name")

    def __init__(self, value, requires_grad=False, name=None):
        self.value = np.asarray(value, dtype=DTYPE)
        self._grad = None
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    @property
    def size(self):
        return self.value.size

    @property
    def grad(self):
        if self._grad is None:
            self._grad = np.zeros_like(self.value)
        return self._grad

    @grad.setter
    def grad(self, g):
        self._grad = g

    def zero_grad(self):
        self._grad = None

    def item(self):
        return float(self.value)

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape})"


def parameter(value, name=None):
    return Tensor(value, requires_grad=True, name=name)


def constant(value):
    return value if isinstance(value, Tensor) else Tensor(value)


class Node:
    __slots__ = ("op", "inputs", "output", "backward")

    def __init__(self, op, inputs, output, backward):
        self.op = op
        self.inputs = inputs
        self.output = output
        self.backward = backward


_local = threading.local()


class Graph:
    """Topologically ordered tape of node records. Confined to one thread."""

    def __init__(self):
        self.nodes = []

    def __enter__(self):
        self._prev = getattr(_local, "graph", None)
        _local.graph = self
        return self

    def __exit__(self, *exc):
        _local.graph = self._prev
        return False

    def __len__(self):
        return len(self.nodes)


def current_graph():
    return getattr(_local, "graph", None)


def _emit(op, inputs, value, backward):
    req = any(t.requires_grad for t in inputs)
    out = Tensor(value, requires_grad=req)
    if req:
        g = getattr(_local, "graph", None)
        if g is not None:
            g.nodes.append(Node(op, inputs, out, backward))
    return out


def backward(graph, loss):
    """Accumulate d(loss)/d(t) into ``t.grad`` for every tensor reachable from ``loss``."""
    if loss.shape != () and loss.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not np.all(np.isfinite(loss.value)):
        raise FloatingPointError("loss is not finite")
    pending = {id(loss): (loss, np.ones_like(loss.value))}
    for node in reversed(graph.nodes):
        entry = pending.pop(id(node.output), None)
        if entry is None:
            continue
        out, g = entry
        out.grad = out.grad + g if out._grad is not None else g.copy()
        for t, gi in zip(node.inputs, node.backward(g)):
            if gi is None or not t.requires_grad:
                continue
            prev = pending.get(id(t))
            pending[id(t)] = (t, gi if prev is None else prev[1] + gi)
    for t, g in pending.values():
        t.grad = t.grad + g if t._grad is not None else g.copy()


# ---------------------------------------------------------------------------
# operations


def _check_same(op, a, b):
    if a.shape != b.shape and a.shape != () and b.shape != ():
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}")


def _unbroadcast(g, shape):
    return np.asarray(g.sum()) if shape == () and g.shape != () else g


def add(a, b):
    a, b = constant(a), constant(b)
    _check_same("add", a, b)

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)
    return _emit("add", (a, b), a.value + b.value, bw)


def sub(a, b):
    a, b = constant(a), constant(b)
    _check_same("sub", a, b)

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)
    return _emit("sub", (a, b), a.value - b.value, bw)


def mul(a, b):
    a, b = constant(a), constant(b)
    _check_same("mul", a, b)

    def bw(g):
        return _unbroadcast(g * b.value, a.shape), _unbroadcast(g * a.value, b.shape)
    return _emit("mul", (a, b), a.value * b.value, bw)


def scale(a, c):
    c = float(c)
    return _emit("scale", (a,), a.value * c, lambda g: (g * c,))


def matmul(a, b):
    a, b = constant(a), constant(b)
    if a.value.ndim not in (1, 2) or b.value.ndim not in (1, 2) or a.shape[-1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    av, bv = a.value, b.value

    def bw(g):
        if av.ndim == 2 and bv.ndim == 2:
            return g @ bv.T, av.T @ g
        if av.ndim == 1 and bv.ndim == 2:
            return bv @ g, np.outer(av, g)
        if av.ndim == 2:
            return np.outer(g, bv), av.T @ g
        return g * bv, g * av
    return _emit("matmul", (a, b), av @ bv, bw)


def add_rows(m, v):
    """Add vector ``v`` to every row of matrix ``m``."""
    if m.value.ndim != 2 or v.shape != (m.shape[1],):
        raise ShapeError(f"add_rows: incompatible shapes {m.shape} and {v.shape}")
    return _emit("add_rows", (m, v), m.value + v.value, lambda g: (g, g.sum(axis=0)))


def outer(u, v):
    if u.value.ndim != 1 or v.value.ndim != 1:
        raise ShapeError(f"outer: expected vectors, got {u.shape} and {v.shape}")
    uv, vv = u.value, v.value
    return _emit("outer", (u, v), np.outer(uv, vv), lambda g: (g @ vv, uv @ g))


def concat(tensors, axis=0):
    tensors = [constant(t) for t in tensors]
    try:
        value = np.concatenate([t.value for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError("concat: incompatible shapes " + ", ".join(str(t.shape) for t in tensors)) from None
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def bw(g):
        return tuple(np.split(g, bounds, axis=axis))
    return _emit("concat", tuple(tensors), value, bw)


def stack(tensors):
    tensors = list(tensors)
    shape = tensors[0].shape
    for t in tensors:
        if t.shape != shape:
            raise ShapeError(f"stack: incompatible shapes {shape} and {t.shape}")
    return _emit("stack", tuple(tensors), np.stack([t.value for t in tensors]),
                 lambda g: tuple(g))


def index(a, key):
    """Basic (non-fancy) indexing: an int, a slice, or a tuple of those."""
    value = a.value[key]

    def bw(g):
        full = np.zeros_like(a.value)
        full[key] = g
        return (full,)
    return _emit("index", (a,), np.array(value, copy=True), bw)


def tanh(a):
    y = np.tanh(a.value)
    return _emit("tanh", (a,), y, lambda g: (g * (1.0 - y * y),))


def sigmoid(a):
    y = expit(a.value)
    return _emit("sigmoid", (a,), y, lambda g: (g * y * (1.0 - y),))


def log(a):
    av = a.value
    return _emit("log", (a,), np.log(av), lambda g: (g / av,))


def softmax(a):
    """Softmax over the last axis."""
    z = a.value - a.value.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=-1, keepdims=True)

    def bw(g):
        return (y * (g - (g * y).sum(axis=-1, keepdims=True)),)
    return _emit("softmax", (a,), y, bw)


def minimum(a, b):
    """Elementwise min; ties send the gradient to ``a``."""
    a, b = constant(a), constant(b)
    if a.shape != b.shape:
        raise ShapeError(f"minimum: incompatible shapes {a.shape} and {b.shape}")
    first = a.value <= b.value
    return _emit("minimum", (a, b), np.where(first, a.value, b.value),
                 lambda g: (np.where(first, g, 0.0), np.where(first, 0.0, g)))


def sum(a):  # noqa: A001 - mirrors numpy naming
    shape = a.shape
    return _emit("sum", (a,), np.asarray(a.value.sum()),
                 lambda g: (np.full(shape, float(g)),))


def embedding(table, ids):
    """Rows of ``table`` for ``ids``; the gradient scatter-adds back into the table."""
    ids = np.asarray(ids, dtype=np.intp)
    if table.value.ndim != 2 or ids.ndim != 1:
        raise ShapeError(f"embedding: table {table.shape} with ids of shape {ids.shape}")

    def bw(g):
        gt = np.zeros_like(table.value)
        np.add.at(gt, ids, g)
        return (gt,)
    return _emit("embedding", (table,), table.value[ids], bw)


def scatter_add(x, ids, size):
    """``out[ids[i]] += x[i]`` into a zero vector of length ``size``."""
    ids = np.asarray(ids, dtype=np.intp)
    if x.shape != ids.shape:
        raise ShapeError(f"scatter_add: values {x.shape} vs ids {ids.shape}")
    out = np.zeros(size)
    np.add.at(out, ids, x.value)
    return _emit("scatter_add", (x,), out, lambda g: (g[ids],))


def pick_log_prob(dist, target, floor=0.0):
    """``log(dist[target] + floor)`` as a 0-d tensor."""
    if dist.value.ndim != 1:
        raise ShapeError(f"pick_log_prob: expected a vector, got {dist.shape}")
    p = dist.value[target] + floor

    def bw(g):
        full = np.zeros_like(dist.value)
        full[target] = g / p
        return (full,)
    return _emit("pick_log_prob", (dist,), np.asarray(np.log(p)), bw)


def lstm_cell(x_proj, h, c, w_h):
    """One LSTM step; returns ``[h_new; c_new]``.

    ``x_proj`` is the already-projected input plus bias (length 4H), gates ordered
    input, forget, output, candidate.
    """
    hidden = h.shape[0]
    if x_proj.shape != (4 * hidden,) or c.shape != (hidden,) or w_h.shape != (hidden, 4 * hidden):
        raise ShapeError(f"lstm_cell: x_proj {x_proj.shape}, h {h.shape}, c {c.shape}, w_h {w_h.shape}")
    hv, cv = h.value, c.value
    z = x_proj.value + hv @ w_h.value
    i = expit(z[:hidden])
    f = expit(z[hidden:2 * hidden])
    o = expit(z[2 * hidden:3 * hidden])
    cand = np.tanh(z[3 * hidden:])
    c_new = f * cv + i * cand
    tc = np.tanh(c_new)
    h_new = o * tc

    def bw(g):
        gh, gc = g[:hidden], g[hidden:]
        dc = gc + gh * o * (1.0 - tc * tc)
        dz = np.concatenate([
            dc * cand * i * (1.0 - i),
            dc * cv * f * (1.0 - f),
            gh * tc * o * (1.0 - o),
            dc * i * (1.0 - cand * cand),
        ])
        return dz, w_h.value @ dz, dc * f, np.outer(hv, dz)
    return _emit("lstm_cell", (x_proj, h, c, w_h), np.concatenate([h_new, c_new]), bw)


# ---------------------------------------------------------------------------
# verification harness


def _as_named(params):
    if isinstance(params, dict):
        return list(params.items())
    return [(p.name or f"param{i}", p) for i, p in enumerate(params)]


def relative_error(a, b):
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)


def grad_errors(f, params, eps=1e-5):
    """Per-parameter max relative error between backprop and central differences.

    ``f(params)`` must return a 0-d Tensor built from ``params``.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    named = _as_named(params)
    for _, p in named:
        p.zero_grad()
    with Graph() as g:
        loss = f(params)
    backward(g, loss)
    analytic = {name: p.grad.copy() for name, p in named}

    def evaluate():
        v = f(params).item()
        if not np.isfinite(v):
            raise FloatingPointError("objective is not finite")
        return v

    errors = {}
    for name, p in named:
        flat = p.value.reshape(-1)
        numeric = np.empty_like(flat)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + eps
            hi = evaluate()
            flat[k] = orig - eps
            lo = evaluate()
            flat[k] = orig
            numeric[k] = (hi - lo) / (2 * eps)
        err = relative_error(analytic[name].reshape(-1), numeric)
        errors[name] = float(err.max()) if err.size else 0.0
    return errors


def grad_check(f, params, eps=1e-5):
    """Max relative error over every parameter entry (see :func:`grad_errors`)."""
    errs = grad_errors(f, params, eps)
    return max(errs.values(), default=0.0)
