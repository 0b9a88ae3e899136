"""Minimal reverse-mode automatic differentiation over numpy arrays.

Only the operations the 1-D CNN needs are provided. Arrays are laid out as
``(batch, channels, length)``. A :class:`Tensor` records a backward closure
only when one of its inputs requires a gradient, so inference builds no
graph at all.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_prev", "_backward")

    def __init__(self, data, requires_grad=False, _prev=(), _backward=None):
        self.data = data
        self.grad = None
        self.requires_grad = requires_grad
        self._prev = _prev
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def backward(self, grad=None):
        """Accumulate gradients into every leaf reachable from this tensor.

        Interior gradients and closures are released as soon as they have
        been propagated.
        """
        if grad is None:
            grad = np.ones_like(self.data)
        order = _topo(self)
        self.grad = grad
        for node in reversed(order):
            if node._backward is None or node.grad is None:
                continue
            node._backward(node.grad)
            node._backward = None
            node._prev = ()
            node.grad = None


def _topo(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._prev:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def _accum(t, g):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = g
    else:
        t.grad = t.grad + g


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, n in enumerate(shape):
        if n == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x))


def _make(data, parents, backward):
    req = any(p.requires_grad for p in parents)
    if not req:
        return Tensor(data)
    return Tensor(data, True, tuple(parents), backward)


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        _accum(a, _unbroadcast(g, a.shape))
        _accum(b, _unbroadcast(g, b.shape))

    return _make(a.data + b.data, (a, b), backward)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(g * a.data, b.shape))

    return _make(a.data * b.data, (a, b), backward)


def _sigmoid(x):
    return expit(x)


def sigmoid(x):
    s = _sigmoid(x.data)

    def backward(g):
        _accum(x, g * s * (1.0 - s))

    return _make(s, (x,), backward)


def swish(x):
    s = _sigmoid(x.data)

    def backward(g):
        _accum(x, g * (s * (1.0 + x.data * (1.0 - s))))

    return _make(x.data * s, (x,), backward)


def relu(x):
    mask = x.data > 0

    def backward(g):
        _accum(x, g * mask)

    return _make(np.where(mask, x.data, 0).astype(x.data.dtype), (x,), backward)


def mean(x, axis):
    n = x.data.shape[axis]

    def backward(g):
        _accum(x, np.broadcast_to(np.expand_dims(g, axis) / n, x.shape).astype(x.data.dtype))

    return _make(x.data.mean(axis=axis), (x,), backward)


def linear(x, w, b=None):
    """``x @ w.T + b`` for ``x`` of shape (N, in) and ``w`` of shape (out, in)."""
    out = x.data @ w.data.T
    if b is not None:
        out = out + b.data
    parents = (x, w) if b is None else (x, w, b)

    def backward(g):
        if x.requires_grad:
            _accum(x, g @ w.data)
        if w.requires_grad:
            _accum(w, g.T @ x.data)
        if b is not None and b.requires_grad:
            _accum(b, g.sum(axis=0))

    return _make(out, parents, backward)


def _im2col(x, k, stride, pad):
    """(N, C, L) -> (C*k, N*Lout) column matrix and Lout."""
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad)))
    win = sliding_window_view(x, k, axis=2)[:, :, ::stride, :]
    n, c, lout, _ = win.shape
    return win.transpose(1, 3, 0, 2).reshape(c * k, n * lout), lout


def conv1d(x, w, stride=1, pad=0):
    """Cross-correlation of ``x`` (N, Cin, L) with ``w`` (Cout, Cin, K), no bias."""
    n, cin, length = x.shape
    cout, _, k = w.shape
    cols, lout = _im2col(x.data, k, stride, pad)
    w2 = w.data.reshape(cout, cin * k)
    out = (w2 @ cols).reshape(cout, n, lout).transpose(1, 0, 2)
    del cols

    def backward(g):
        g2 = g.transpose(1, 0, 2).reshape(cout, n * lout)
        if w.requires_grad:
            cols_, _ = _im2col(x.data, k, stride, pad)
            _accum(w, (g2 @ cols_.T).reshape(w.shape))
            del cols_
        if x.requires_grad:
            dcols = (w2.T @ g2).reshape(cin, k, n, lout)
            dxp = np.zeros((n, cin, length + 2 * pad), dtype=x.data.dtype)
            span = stride * (lout - 1) + 1
            for j in range(k):
                dxp[:, :, j:j + span:stride] += dcols[:, j].transpose(1, 0, 2)
            _accum(x, dxp[:, :, pad:pad + length])

    return _make(out, (x, w), backward)


def batch_norm(x, gamma, beta, running_mean, running_var, training, momentum, eps, update_stats=True):
    """Per-channel normalization over the batch and length axes.

    In training mode batch statistics are used and, when ``update_stats``,
    the running buffers are updated in place as
    ``running = momentum * running + (1 - momentum) * batch``.
    """
    shape = (1, -1, 1)
    if training:
        mu = x.data.mean(axis=(0, 2))
        var = x.data.var(axis=(0, 2))
        if update_stats:
            m = x.data.shape[0] * x.data.shape[2]
            unbiased = var * (m / max(m - 1, 1))
            running_mean *= momentum
            running_mean += (1 - momentum) * mu
            running_var *= momentum
            running_var += (1 - momentum) * unbiased
    else:
        mu, var = running_mean, running_var
    inv = (1.0 / np.sqrt(var + eps)).astype(x.data.dtype)
    xhat = (x.data - mu.reshape(shape)) * inv.reshape(shape)
    out = xhat * gamma.data.reshape(shape) + beta.data.reshape(shape)

    def backward(g):
        if gamma.requires_grad:
            _accum(gamma, (g * xhat).sum(axis=(0, 2)))
        if beta.requires_grad:
            _accum(beta, g.sum(axis=(0, 2)))
        if x.requires_grad:
            dxhat = g * gamma.data.reshape(shape)
            if training:
                m = x.data.shape[0] * x.data.shape[2]
                s1 = dxhat.sum(axis=(0, 2), keepdims=True)
                s2 = (dxhat * xhat).sum(axis=(0, 2), keepdims=True)
                dx = (dxhat - s1 / m - xhat * (s2 / m)) * inv.reshape(shape)
            else:
                dx = dxhat * inv.reshape(shape)
            _accum(x, dx)

    return _make(out, (x, gamma, beta), backward)


def bce_with_logits(z, y):
    """Mean binary cross-entropy of logits ``z`` (N,) against labels ``y`` (N,)."""
    zd = z.data
    yd = np.asarray(y, dtype=zd.dtype)
    loss = np.maximum(zd, 0) - zd * yd + np.log1p(np.exp(-np.abs(zd)))
    n = zd.size

    def backward(g):
        _accum(z, g * (_sigmoid(zd) - yd) / n)

    return _make(np.asarray(loss.mean(), dtype=zd.dtype), (z,), backward)
