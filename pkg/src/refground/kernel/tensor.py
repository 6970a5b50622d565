"""Dense float64 tensors with taped reverse-mode differentiation.

Every primitive records its backward rule on the active :class:`Tape` (a context
manager). With no tape open the same primitives run forward-only, which is what
evaluation uses. Gradients accumulate into ``Tensor.grad`` so a batch is just
several taped passes before one optimizer step.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError, UsageError, ValidationError

_ACTIVE_TAPE = None

# guard thresholds, fixed here and nowhere else
L2_GUARD = 1e-12
EXP_CAP = 709.0


class Tensor:
    """A float64 ndarray plus an optional gradient of the same shape."""

    __slots__ = ("data", "grad", "trainable", "_tracked", "_parents", "_backward")

    def __init__(self, data, trainable=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.trainable = trainable
        self._tracked = trainable
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    def item(self):
        return float(self.data)

    def numpy(self):
        return np.array(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, trainable={self.trainable})"


class Tape:
    """Ordered record of primitives; creation order is a valid topological order."""

    def __init__(self):
        self._nodes = []
        self._outer = None
        self._spent = False

    def __enter__(self):
        global _ACTIVE_TAPE
        self._outer = _ACTIVE_TAPE
        _ACTIVE_TAPE = self
        return self

    def __exit__(self, exc_type, exc, tb):
        global _ACTIVE_TAPE
        _ACTIVE_TAPE = self._outer
        return False

    def __len__(self):
        return len(self._nodes)

    def backward(self, loss):
        """Seed d(loss)=1 and replay the tape in reverse, accumulating grads."""
        if not isinstance(loss, Tensor) or loss.data.shape != ():
            raise UsageError("backward root must be a scalar Tensor")
        if not self._nodes:
            raise UsageError("backward on an empty tape")
        if self._spent:
            raise UsageError("tape has already been replayed")
        self._spent = True
        if not loss._tracked:
            return
        loss.grad = np.ones((), dtype=np.float64)
        for node in reversed(self._nodes):
            if node.grad is not None and node._backward is not None:
                node._backward()


def backward(loss, tape):
    tape.backward(loss)


def _wrap(value):
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def _record(out, parents, backfn):
    tape = _ACTIVE_TAPE
    if tape is None:
        return out
    for p in parents:
        if p._tracked:
            out._tracked = True
            out._parents = parents
            out._backward = backfn
            tape._nodes.append(out)
            return out
    return out


def _accum(t, g):
    if not t._tracked:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64)
    else:
        t.grad += g


def _accum_at(t, index, g):
    # sparse accumulation for row/slice gathers
    if not t._tracked:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad[index] += g


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    if shape == ():
        return g.sum()
    if g.ndim == 2 and shape == (g.shape[1],):
        return g.sum(axis=0)
    raise ShapeError(f"cannot reduce gradient {g.shape} to {shape}")


def _check_binary(a, b, op):
    # same shape, either side scalar, or 2-D plus matching row vector
    sa, sb = a.data.shape, b.data.shape
    if sa == sb or sa == () or sb == ():
        return
    if len(sa) == 2 and sb == (sa[1],):
        return
    if len(sb) == 2 and sa == (sb[1],):
        return
    raise ShapeError(f"{op}: incompatible shapes {sa} and {sb}")


def add(a, b):
    a, b = _wrap(a), _wrap(b)
    _check_binary(a, b, "add")
    out = Tensor(a.data + b.data)

    def _bw():
        g = out.grad
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(g, b.data.shape))

    return _record(out, (a, b), _bw)


def sub(a, b):
    a, b = _wrap(a), _wrap(b)
    _check_binary(a, b, "sub")
    out = Tensor(a.data - b.data)

    def _bw():
        g = out.grad
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(-g, b.data.shape))

    return _record(out, (a, b), _bw)


def neg(x):
    out = Tensor(-x.data)

    def _bw():
        _accum(x, -out.grad)

    return _record(out, (x,), _bw)


def mul(a, b):
    a, b = _wrap(a), _wrap(b)
    _check_binary(a, b, "mul")
    out = Tensor(a.data * b.data)

    def _bw():
        g = out.grad
        _accum(a, _unbroadcast(g * b.data, a.data.shape))
        _accum(b, _unbroadcast(g * a.data, b.data.shape))

    return _record(out, (a, b), _bw)


def add_n(xs):
    if not xs:
        raise UsageError("add_n needs at least one input")
    shape = xs[0].data.shape
    for x in xs[1:]:
        if x.data.shape != shape:
            raise ShapeError(f"add_n: shape {x.data.shape} does not match {shape}")
    total = xs[0].data.copy()
    for x in xs[1:]:
        total += x.data
    out = Tensor(total)

    def _bw():
        g = out.grad
        for x in xs:
            _accum(x, g)

    return _record(out, tuple(xs), _bw)


def matmul(a, b):
    ad, bd = a.data, b.data
    if ad.ndim == 2 and bd.ndim == 2:
        if ad.shape[1] != bd.shape[0]:
            raise ShapeError(f"matmul: {ad.shape} @ {bd.shape}")
        out = Tensor(ad @ bd)

        def _bw():
            g = out.grad
            _accum(a, g @ bd.T)
            _accum(b, ad.T @ g)

    elif ad.ndim == 2 and bd.ndim == 1:
        if ad.shape[1] != bd.shape[0]:
            raise ShapeError(f"matmul: {ad.shape} @ {bd.shape}")
        out = Tensor(ad @ bd)

        def _bw():
            g = out.grad
            _accum(a, np.outer(g, bd))
            _accum(b, ad.T @ g)

    elif ad.ndim == 1 and bd.ndim == 2:
        if ad.shape[0] != bd.shape[0]:
            raise ShapeError(f"matmul: {ad.shape} @ {bd.shape}")
        out = Tensor(ad @ bd)

        def _bw():
            g = out.grad
            _accum(a, bd @ g)
            _accum(b, np.outer(ad, g))

    else:
        raise ShapeError(f"matmul: unsupported ranks {ad.shape} @ {bd.shape}")
    return _record(out, (a, b), _bw)


def dot(a, b):
    if a.data.ndim != 1 or a.data.shape != b.data.shape:
        raise ShapeError(f"dot: {a.data.shape} . {b.data.shape}")
    out = Tensor(a.data @ b.data)

    def _bw():
        g = out.grad
        _accum(a, g * b.data)
        _accum(b, g * a.data)

    return _record(out, (a, b), _bw)


def affine(x, w, b):
    """x @ w + b with x either a vector or a matrix of row vectors."""
    xd, wd, bd = x.data, w.data, b.data
    if wd.ndim != 2 or bd.shape != (wd.shape[1],):
        raise ShapeError(f"affine: weight {wd.shape} bias {bd.shape}")
    if xd.ndim == 1:
        if xd.shape[0] != wd.shape[0]:
            raise ShapeError(f"affine: input {xd.shape} vs weight {wd.shape}")
        out = Tensor(xd @ wd + bd)

        def _bw():
            g = out.grad
            _accum(x, wd @ g)
            _accum(w, np.outer(xd, g))
            _accum(b, g)

    elif xd.ndim == 2:
        if xd.shape[1] != wd.shape[0]:
            raise ShapeError(f"affine: input {xd.shape} vs weight {wd.shape}")
        out = Tensor(xd @ wd + bd)

        def _bw():
            g = out.grad
            _accum(x, g @ wd.T)
            _accum(w, xd.T @ g)
            _accum(b, g.sum(axis=0))

    else:
        raise ShapeError(f"affine: unsupported input rank {xd.shape}")
    return _record(out, (x, w, b), _bw)


def relu(x):
    out = Tensor(np.maximum(x.data, 0.0))

    def _bw():
        _accum(x, out.grad * (x.data > 0.0))

    return _record(out, (x,), _bw)


def sigmoid(x):
    xd = x.data
    t = np.exp(-np.abs(xd))
    y = np.where(xd >= 0.0, 1.0 / (1.0 + t), t / (1.0 + t))
    out = Tensor(y)

    def _bw():
        _accum(x, out.grad * y * (1.0 - y))

    return _record(out, (x,), _bw)


def tanh(x):
    y = np.tanh(x.data)
    out = Tensor(y)

    def _bw():
        _accum(x, out.grad * (1.0 - y * y))

    return _record(out, (x,), _bw)


def exp(x):
    y = np.exp(np.minimum(x.data, EXP_CAP))
    out = Tensor(y)

    def _bw():
        _accum(x, out.grad * y)

    return _record(out, (x,), _bw)


def log(x):
    if np.any(x.data <= 0.0):
        raise ValidationError("log of a non-positive value")
    out = Tensor(np.log(x.data))

    def _bw():
        _accum(x, out.grad / x.data)

    return _record(out, (x,), _bw)


def sum_all(x):
    out = Tensor(x.data.sum())

    def _bw():
        _accum(x, np.broadcast_to(out.grad, x.data.shape))

    return _record(out, (x,), _bw)


def softmax(x):
    """Numerically stable softmax over a vector; output sums to one."""
    xd = x.data
    if xd.ndim != 1 or xd.shape[0] == 0:
        raise UsageError("softmax expects a non-empty vector")
    e = np.exp(xd - xd.max())
    y = e / e.sum()
    out = Tensor(y)

    def _bw():
        g = out.grad
        _accum(x, y * (g - g @ y))

    return _record(out, (x,), _bw)


def l2_normalize(x):
    """x / ||x||_2, returning x unchanged when the norm is below the guard."""
    xd = x.data
    if xd.ndim != 1:
        raise ShapeError("l2_normalize expects a vector")
    n = np.sqrt(xd @ xd)
    if n < L2_GUARD:
        out = Tensor(xd.copy())

        def _bw():
            _accum(x, out.grad)

    else:
        y = xd / n
        out = Tensor(y)

        def _bw():
            g = out.grad
            _accum(x, (g - y * (g @ y)) / n)

    return _record(out, (x,), _bw)


def l2_normalize_rows(x):
    """Row-wise l2_normalize of a matrix, same guard per row."""
    xd = x.data
    if xd.ndim != 2:
        raise ShapeError("l2_normalize_rows expects a matrix")
    norms = np.sqrt((xd * xd).sum(axis=1))
    small = norms < L2_GUARD
    safe = np.where(small, 1.0, norms)
    y = xd / safe[:, None]
    out = Tensor(y)

    def _bw():
        g = out.grad
        dots = (g * y).sum(axis=1, keepdims=True)
        dx = (g - y * dots) / safe[:, None]
        if small.any():
            dx[small] = g[small]
        _accum(x, dx)

    return _record(out, (x,), _bw)


def norm_cap(x):
    """Divide a vector by max(|entries|) only when that maximum exceeds one."""
    xd = x.data
    if xd.ndim != 1 or xd.shape[0] == 0:
        raise UsageError("norm_cap expects a non-empty vector")
    m = np.abs(xd).max()
    if m <= 1.0:
        out = Tensor(xd.copy())

        def _bw():
            _accum(x, out.grad)

    else:
        j = int(np.argmax(np.abs(xd)))  # first maximal entry on ties
        y = xd / m
        out = Tensor(y)

        def _bw():
            g = out.grad
            dx = g / m
            dx[j] -= np.sign(xd[j]) * (g @ xd) / (m * m)
            _accum(x, dx)

    return _record(out, (x,), _bw)


def maximum(a, b):
    if a.data.shape != b.data.shape:
        raise ShapeError(f"maximum: {a.data.shape} vs {b.data.shape}")
    mask = a.data >= b.data  # ties route to the first input
    out = Tensor(np.where(mask, a.data, b.data))

    def _bw():
        g = out.grad
        _accum(a, g * mask)
        _accum(b, g * ~mask)

    return _record(out, (a, b), _bw)


def minimum(a, b):
    if a.data.shape != b.data.shape:
        raise ShapeError(f"minimum: {a.data.shape} vs {b.data.shape}")
    mask = a.data <= b.data
    out = Tensor(np.where(mask, a.data, b.data))

    def _bw():
        g = out.grad
        _accum(a, g * mask)
        _accum(b, g * ~mask)

    return _record(out, (a, b), _bw)


def concat(parts):
    for p in parts:
        if p.data.ndim != 1:
            raise ShapeError("concat expects vectors")
    out = Tensor(np.concatenate([p.data for p in parts]))
    offsets = np.cumsum([0] + [p.data.shape[0] for p in parts])

    def _bw():
        g = out.grad
        for p, a, b in zip(parts, offsets[:-1], offsets[1:]):
            _accum(p, g[a:b])

    return _record(out, tuple(parts), _bw)


def concat_cols(parts):
    for p in parts:
        if p.data.ndim != 2:
            raise ShapeError("concat_cols expects matrices")
    out = Tensor(np.concatenate([p.data for p in parts], axis=1))
    offsets = np.cumsum([0] + [p.data.shape[1] for p in parts])

    def _bw():
        g = out.grad
        for p, a, b in zip(parts, offsets[:-1], offsets[1:]):
            _accum(p, g[:, a:b])

    return _record(out, tuple(parts), _bw)


def stack_rows(parts):
    for p in parts:
        if p.data.ndim != 1:
            raise ShapeError("stack_rows expects vectors")
    out = Tensor(np.stack([p.data for p in parts], axis=0))

    def _bw():
        g = out.grad
        for t, p in enumerate(parts):
            _accum(p, g[t])

    return _record(out, tuple(parts), _bw)


def stack_cols(parts):
    for p in parts:
        if p.data.ndim != 1:
            raise ShapeError("stack_cols expects vectors")
    out = Tensor(np.stack([p.data for p in parts], axis=1))

    def _bw():
        g = out.grad
        for t, p in enumerate(parts):
            _accum(p, g[:, t])

    return _record(out, tuple(parts), _bw)


def row(x, i):
    if x.data.ndim != 2:
        raise ShapeError("row expects a matrix")
    out = Tensor(x.data[i])

    def _bw():
        _accum_at(x, i, out.grad)

    return _record(out, (x,), _bw)


def slice1(x, a, b):
    if x.data.ndim != 1:
        raise ShapeError("slice1 expects a vector")
    out = Tensor(x.data[a:b])

    def _bw():
        _accum_at(x, slice(a, b), out.grad)

    return _record(out, (x,), _bw)


def pick(x, i):
    if x.data.ndim != 1:
        raise ShapeError("pick expects a vector")
    out = Tensor(x.data[i])

    def _bw():
        _accum_at(x, i, out.grad)

    return _record(out, (x,), _bw)


def lstm_step(w, b, x, h, c):
    """One fused LSTM step; returns [h'; c'] as a single vector.

    Gate layout along the 4h axis is input, forget, cell, output. The fused
    backward is checked against finite differences in the kernel tests.
    """
    hidden = h.data.shape[0]
    if w.data.shape != (4 * hidden, x.data.shape[0] + hidden):
        raise ShapeError(
            f"lstm_step: weight {w.data.shape} vs input {x.data.shape[0]}+{hidden}"
        )
    if b.data.shape != (4 * hidden,):
        raise ShapeError(f"lstm_step: bias {b.data.shape}")
    if c.data.shape != (hidden,):
        raise ShapeError(f"lstm_step: cell state {c.data.shape}")

    s = np.concatenate([x.data, h.data])
    z = w.data @ s + b.data
    zt = np.exp(-np.abs(z))
    sig = np.where(z >= 0.0, 1.0 / (1.0 + zt), zt / (1.0 + zt))
    gi = sig[:hidden]
    gf = sig[hidden : 2 * hidden]
    gg = np.tanh(z[2 * hidden : 3 * hidden])
    go = sig[3 * hidden :]
    c2 = gf * c.data + gi * gg
    tc = np.tanh(c2)
    h2 = go * tc
    out = Tensor(np.concatenate([h2, c2]))

    def _bw():
        g = out.grad
        gh = g[:hidden]
        dc = g[hidden:] + gh * go * (1.0 - tc * tc)
        do = gh * tc
        dz = np.concatenate(
            [
                dc * gg * gi * (1.0 - gi),
                dc * c.data * gf * (1.0 - gf),
                dc * gi * (1.0 - gg * gg),
                do * go * (1.0 - go),
            ]
        )
        _accum(w, np.outer(dz, s))
        _accum(b, dz)
        ds = w.data.T @ dz
        _accum(x, ds[: x.data.shape[0]])
        _accum(h, ds[x.data.shape[0] :])
        _accum(c, dc * gf)

    return _record(out, (w, b, x, h, c), _bw)


def edge_transfer(gamma, receivers, senders, lam, size):
    """lam_new[i] = sum of gamma_e * lam[j] over edges e=(i<-j).

    ``receivers``/``senders`` are integer index arrays aligned with ``gamma``;
    absent edges contribute nothing. Equivalent to a dense matrix product with
    the sparse weight matrix scattered to shape (size, size).
    """
    receivers = np.asarray(receivers, dtype=np.intp)
    senders = np.asarray(senders, dtype=np.intp)
    if gamma.data.shape != receivers.shape or receivers.shape != senders.shape:
        raise ShapeError("edge_transfer: index arrays must align with gamma")
    if lam.data.ndim != 1:
        raise ShapeError("edge_transfer: lam must be a vector")
    outd = np.zeros(size, dtype=np.float64)
    np.add.at(outd, receivers, gamma.data * lam.data[senders])
    out = Tensor(outd)

    def _bw():
        g = out.grad
        _accum(gamma, g[receivers] * lam.data[senders])
        dlam = np.zeros_like(lam.data)
        np.add.at(dlam, senders, g[receivers] * gamma.data)
        _accum(lam, dlam)

    return _record(out, (gamma, lam), _bw)
