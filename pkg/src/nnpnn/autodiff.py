"""Minimal reverse-mode automatic differentiation over dense real vectors.

A :class:`Graph` is an append-only tape. Every operation evaluates eagerly
with numpy and, when the graph is recording, appends a closure that
propagates adjoints back to its inputs. Trainable arrays live in flat
:class:`ParamStore` buffers so that gradients and optimizer state are single
contiguous vectors.

Frozen arrays (plain ``ndarray`` weights, e.g. a target network) take part in
the forward pass and pass adjoints through to their inputs, but never receive
gradients of their own.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DataError, NonFiniteError, ShapeError


class Param:
    """A trainable array: a named view into a :class:`ParamStore`."""

    __slots__ = ("store", "name", "offset", "shape", "size")

    def __init__(self, store, name, offset, shape):
        self.store = store
        self.name = name
        self.offset = offset
        self.shape = tuple(shape)
        self.size = int(np.prod(self.shape, dtype=np.int64))

    @property
    def value(self):
        return self.store.flat[self.offset:self.offset + self.size].reshape(self.shape)

    def __repr__(self):
        return f"Param({self.store.name}/{self.name}, shape={self.shape})"


class ParamStore:
    """Flat float64 buffer backing a set of trainable arrays.

    Arrays are registered with :meth:`add`; the backing buffer grows as they
    are added and every :class:`Param` reads through to it, so writing
    ``store.flat`` in place updates every view.
    """

    def __init__(self, name="params"):
        self.name = name
        self.flat = np.zeros(0)
        self.params: list[Param] = []

    @property
    def size(self):
        return self.flat.size

    def add(self, name, init):
        init = np.asarray(init, dtype=np.float64)
        p = Param(self, name, self.flat.size, init.shape)
        self.flat = np.concatenate([self.flat, init.ravel()])
        self.params.append(p)
        return p

    def names(self):
        return [p.name for p in self.params]

    def __repr__(self):
        return f"ParamStore({self.name!r}, size={self.size})"


class VecNode:
    """Handle to a vector value recorded on a graph."""

    __slots__ = ("graph", "id", "dim")

    def __init__(self, graph, id, dim):
        self.graph = graph
        self.id = id
        self.dim = dim

    @property
    def value(self):
        return self.graph._values[self.id]

    def __repr__(self):
        return f"VecNode(id={self.id}, dim={self.dim}, kind={self.graph._kinds[self.id]})"


class GradientMap:
    """Result of :meth:`Graph.backward`.

    Index with a :class:`ParamStore` for its flat gradient, with a
    :class:`Param` for a shaped view, or with a :class:`VecNode` for that
    node's adjoint. Anything the loss does not depend on maps to zeros.
    """

    def __init__(self, stores, adjoints, dims):
        self._stores = stores
        self._adj = adjoints
        self._dims = dims

    def __getitem__(self, key):
        if isinstance(key, ParamStore):
            g = self._stores.get(key)
            return np.zeros(key.size) if g is None else g
        if isinstance(key, Param):
            flat = self[key.store]
            return flat[key.offset:key.offset + key.size].reshape(key.shape)
        if isinstance(key, VecNode):
            a = self._adj[key.id]
            return np.zeros(self._dims[key.id]) if a is None else np.asarray(a, dtype=np.float64)
        raise TypeError(f"cannot index gradients with {type(key).__name__}")

    @property
    def stores(self):
        return list(self._stores)


class Graph:
    """Append-only computation record.

    With ``record=False`` operations still evaluate (and still check for
    non-finite values) but nothing is kept for a backward pass; use this for
    evaluation-only forward passes.
    """

    def __init__(self, record=True):
        self.record = record
        self._values: list[np.ndarray] = []
        self._kinds: list[str] = []
        self._backs: list[Callable | None] = []
        self._stores: dict[ParamStore, None] = {}

    def __len__(self):
        return len(self._values)

    def _push(self, kind, value, back):
        if not np.isfinite(value).all():
            raise NonFiniteError(
                f"non-finite value produced by node {len(self._values)} ({kind})",
                provenance=(len(self._values), kind),
            )
        node = VecNode(self, len(self._values), value.shape[0])
        self._values.append(value)
        self._kinds.append(kind)
        self._backs.append(back)
        return node

    def _own(self, node):
        if not isinstance(node, VecNode) or node.graph is not self:
            raise ShapeError("node does not belong to this graph")
        return node

    def input(self, value, name="input"):
        """Record a leaf vector (adjoints are available after backward)."""
        v = np.array(value, dtype=np.float64, ndmin=1)
        if v.ndim != 1:
            raise ShapeError(f"leaf {name!r} must be a vector, got shape {v.shape}")
        if not np.isfinite(v).all():
            raise DataError(f"leaf {name!r} contains non-finite values")
        return self._push(f"input:{name}", v, None)

    def backward(self, loss):
        """Reverse sweep from a scalar ``loss`` node.

        Adjoints are accumulated in strictly decreasing node order, so the
        result is bitwise reproducible for a given construction sequence.
        """
        self._own(loss)
        if loss.dim != 1:
            raise ShapeError(f"backward needs a scalar loss, got dim {loss.dim}")
        if not self.record:
            raise ShapeError("graph was built with record=False")
        n = len(self._values)
        adj: list = [None] * n
        adj[loss.id] = np.ones(1)
        grads = {s: np.zeros(s.size) for s in self._stores}
        for i in range(loss.id, -1, -1):
            a = adj[i]
            back = self._backs[i]
            if a is None or back is None:
                continue
            if not np.isfinite(a).all():
                raise NonFiniteError(
                    f"non-finite adjoint at node {i} ({self._kinds[i]})",
                    provenance=(i, self._kinds[i]),
                )
            back(a, adj, grads)
        for s, g in grads.items():
            if not np.isfinite(g).all():
                raise NonFiniteError(f"non-finite gradient for store {s.name!r}", provenance=s.name)
        dims = [v.shape[0] for v in self._values]
        return GradientMap(grads, adj, dims)


def _accum(adj, i, g):
    cur = adj[i]
    adj[i] = g if cur is None else cur + g


def _unwrap(a):
    return a.value if isinstance(a, Param) else np.asarray(a, dtype=np.float64)


def affine(g, W, b, x):
    """``W @ x + b``.

    ``W`` and ``b`` are either both :class:`Param` (trainable: gradients are
    produced for them) or both plain arrays (frozen).
    """
    g._own(x)
    trainable = isinstance(W, Param)
    if trainable != isinstance(b, Param):
        raise ShapeError("W and b must both be trainable or both frozen")
    Wv = _unwrap(W)
    bv = _unwrap(b)
    if Wv.ndim != 2 or bv.ndim != 1 or Wv.shape[0] != bv.shape[0]:
        raise ShapeError(f"affine parameter shapes disagree: W{Wv.shape}, b{bv.shape}")
    if Wv.shape[1] != x.dim:
        raise ShapeError(f"affine expects input dim {Wv.shape[1]}, got {x.dim}")
    xv = x.value
    out = Wv @ xv + bv
    if not np.isfinite(out).all() and not (np.isfinite(Wv).all() and np.isfinite(bv).all()):
        raise DataError("affine parameters contain non-finite values")
    if not g.record:
        return g._push("affine", out, None)

    xid = x.id
    if trainable:
        g._stores.setdefault(W.store, None)
        g._stores.setdefault(b.store, None)
        w_store, w_off, w_size, w_shape = W.store, W.offset, W.size, W.shape
        b_store, b_off, b_size = b.store, b.offset, b.size

        def back(a, adj, grads):
            _accum(adj, xid, Wv.T @ a)
            gw = grads[w_store][w_off:w_off + w_size].reshape(w_shape)
            gw += np.outer(a, xv)
            grads[b_store][b_off:b_off + b_size] += a
    else:
        def back(a, adj, grads):
            _accum(adj, xid, Wv.T @ a)

    return g._push("affine", out, back)


def param_vector(g, p):
    """Record a trainable vector as a node; its adjoint flows into ``p``'s store."""
    if not isinstance(p, Param) or len(p.shape) != 1:
        raise ShapeError("param_vector takes a one-dimensional Param")
    out = p.value.copy()
    if not g.record:
        return g._push("param", out, None)
    g._stores.setdefault(p.store, None)
    store, off, size = p.store, p.offset, p.size

    def back(a, adj, grads):
        grads[store][off:off + size] += a

    return g._push(f"param:{p.name}", out, back)


def tanh_act(g, x):
    """Componentwise hyperbolic tangent."""
    g._own(x)
    out = np.tanh(x.value)
    if not g.record:
        return g._push("tanh", out, None)
    xid = x.id

    def back(a, adj, grads):
        _accum(adj, xid, a * (1.0 - out * out))

    return g._push("tanh", out, back)


def concat(g, parts: Sequence[VecNode]):
    """Concatenate vectors in the order given. Zero-dimensional parts are allowed."""
    parts = list(parts)
    if not parts:
        raise ShapeError("concat needs at least one part")
    for p in parts:
        g._own(p)
    out = np.concatenate([p.value for p in parts])
    if not g.record:
        return g._push("concat", out, None)
    spans = []
    start = 0
    for p in parts:
        spans.append((p.id, start, start + p.dim))
        start += p.dim

    def back(a, adj, grads):
        for pid, lo, hi in spans:
            if hi > lo:
                _accum(adj, pid, a[lo:hi])

    return g._push("concat", out, back)


def take(g, x, start, stop):
    """Coordinate projection ``x[start:stop]``."""
    g._own(x)
    if not 0 <= start <= stop <= x.dim:
        raise ShapeError(f"slice [{start}:{stop}] out of range for dim {x.dim}")
    out = x.value[start:stop].copy()
    if not g.record:
        return g._push("take", out, None)
    xid, dim = x.id, x.dim

    def back(a, adj, grads):
        full = np.zeros(dim)
        full[start:stop] = a
        _accum(adj, xid, full)

    return g._push("take", out, back)


def _target(pred, target):
    t = np.array(target, dtype=np.float64, ndmin=1)
    if t.shape != (pred.dim,):
        raise ShapeError(f"target shape {t.shape} does not match prediction dim {pred.dim}")
    if not np.isfinite(t).all():
        raise DataError("target contains non-finite values")
    return t


def mae_loss(g, pred, target):
    """Sum of absolute errors over components (not the mean)."""
    g._own(pred)
    t = _target(pred, target)
    r = pred.value - t
    out = np.array([np.abs(r).sum()])
    if not g.record:
        return g._push("mae", out, None)
    pid = pred.id
    sign = np.sign(r)

    def back(a, adj, grads):
        _accum(adj, pid, a[0] * sign)

    return g._push("mae", out, back)


def mse_loss(g, pred, target):
    """Mean of squared errors over components."""
    g._own(pred)
    t = _target(pred, target)
    r = pred.value - t
    n = max(pred.dim, 1)
    out = np.array([(r @ r) / n])
    if not g.record:
        return g._push("mse", out, None)
    pid = pred.id
    scale = 2.0 / n

    def back(a, adj, grads):
        _accum(adj, pid, (a[0] * scale) * r)

    return g._push("mse", out, back)


def mean_of(g, scalars: Iterable[VecNode]):
    """Average of scalar nodes (used to batch several losses into one)."""
    scalars = list(scalars)
    if not scalars:
        raise ShapeError("mean_of needs at least one node")
    for s in scalars:
        g._own(s)
        if s.dim != 1:
            raise ShapeError("mean_of takes scalar nodes only")
    k = len(scalars)
    out = np.array([sum(float(s.value[0]) for s in scalars) / k])
    if not g.record:
        return g._push("mean", out, None)
    ids = [s.id for s in scalars]

    def back(a, adj, grads):
        share = a / k
        for i in ids:
            _accum(adj, i, share)

    return g._push("mean", out, back)


# --------------------------------------------------------------------------
# finite-difference oracle


def gradient_errors(f, x, eps=1e-5, coords=None):
    """Per-coordinate relative error between analytic and central-difference gradients.

    ``f(x)`` must return ``(value, gradient)``; only the value is used for
    the numeric side. Returns ``(errors, analytic, numeric)`` over ``coords``
    (all coordinates by default).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = np.array(x, dtype=np.float64, ndmin=1)
    _, analytic = f(x.copy())
    analytic = np.asarray(analytic, dtype=np.float64).ravel()
    idx = np.arange(x.size) if coords is None else np.asarray(coords, dtype=np.int64)
    numeric = np.empty(idx.size)
    for k, i in enumerate(idx):
        xp = x.copy()
        xp[i] += eps
        xm = x.copy()
        xm[i] -= eps
        numeric[k] = (float(f(xp)[0]) - float(f(xm)[0])) / (2.0 * eps)
    a = analytic[idx]
    denom = np.maximum(np.maximum(np.abs(a), np.abs(numeric)), 1e-8)
    return np.abs(a - numeric) / denom, a, numeric


def finite_diff_check(f, x, eps=1e-5, coords=None):
    """Maximum relative gradient error of ``f`` at ``x`` (see :func:`gradient_errors`)."""
    errs, _, _ = gradient_errors(f, x, eps=eps, coords=coords)
    return float(errs.max()) if errs.size else 0.0


def wrt_input(build):
    """Adapt ``build(g, xnode) -> scalar node`` into a ``(value, grad)`` function of x."""

    def f(x):
        g = Graph()
        xn = g.input(x)
        loss = build(g, xn)
        grads = g.backward(loss)
        return float(loss.value[0]), grads[xn]

    return f


def wrt_store(build, store):
    """Adapt ``build(g) -> scalar node`` into a ``(value, grad)`` function of ``store.flat``.

    The store's contents are overwritten for each evaluation and restored on
    the way out of each call.
    """

    def f(theta):
        saved = store.flat.copy()
        store.flat[:] = theta
        try:
            g = Graph()
            loss = build(g)
            grads = g.backward(loss)
            return float(loss.value[0]), grads[store].copy()
        finally:
            store.flat[:] = saved

    return f
