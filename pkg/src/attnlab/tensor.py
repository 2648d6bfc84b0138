"""Minimal dense tensor with reverse-mode autodiff on numpy.

Everything is float64 and row-major. Each operation returns a fresh
tensor and records a backward closure, so the tape is rebuilt on every
forward pass; ``backward`` walks it once in reverse topological order.

Multiply-accumulate counting: while a ``counting()`` context is active,
every forward operation reports its scalar multiplies as MACs (additions
ride along for free), and exponentials / divisions are tallied in
separate buckets. Backward passes emit nothing.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

from .errors import ContractViolation, DegenerateRegion, NumericFault, ShapeMismatch


class MacCounter:
    """Tally of forward-pass arithmetic, split by kind."""

    __slots__ = ("macs", "exps", "divs")

    def __init__(self):
        self.macs = 0
        self.exps = 0
        self.divs = 0

    def __repr__(self):
        return f"MacCounter(macs={self.macs}, exps={self.exps}, divs={self.divs})"


_counters: list[MacCounter] = []


@contextmanager
def counting():
    """Collect MAC/exp/div counts for ops run inside the block."""
    c = MacCounter()
    _counters.append(c)
    try:
        yield c
    finally:
        _counters.remove(c)


def _emit(macs=0, exps=0, divs=0):
    for c in _counters:
        c.macs += macs
        c.exps += exps
        c.divs += divs


def _unbroadcast(grad, shape):
    """Reduce a broadcast gradient back to the operand's shape."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


class Tensor:
    """A numpy array plus the tape bookkeeping needed for backward.

    ``requires_grad=True`` marks a trainable leaf. ``lr_scale`` is a
    per-parameter learning-rate multiplier honored by the optimizer
    (1.0 for everything except deformable offset predictors).
    """

    __slots__ = ("data", "requires_grad", "grad", "lr_scale", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, lr_scale=1.0):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = None
        self.lr_scale = lr_scale
        self._parents = ()
        self._backward = None

    # -- construction helpers -------------------------------------------------

    @staticmethod
    def _from_op(data, parents, backward):
        out = Tensor(data)
        tracked = tuple(p for p in parents if p.requires_grad or p._parents)
        if tracked:
            out._parents = tracked
            out._backward = backward
        return out

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # -- arithmetic -----------------------------------------------------------

    def __add__(self, other):
        other = _as_tensor(other)
        data = self.data + other.data

        def backward(g):
            self._accum(_unbroadcast(g, self.shape))
            other._accum(_unbroadcast(g, other.shape))

        return Tensor._from_op(data, (self, other), backward)

    __radd__ = __add__

    def __neg__(self):
        def backward(g):
            self._accum(-g)

        return Tensor._from_op(-self.data, (self,), backward)

    def __sub__(self, other):
        return self + (-_as_tensor(other))

    def __rsub__(self, other):
        return _as_tensor(other) + (-self)

    def __mul__(self, other):
        other = _as_tensor(other)
        data = self.data * other.data
        _emit(macs=data.size)

        def backward(g):
            self._accum(_unbroadcast(g * other.data, self.shape))
            other._accum(_unbroadcast(g * self.data, other.shape))

        return Tensor._from_op(data, (self, other), backward)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        if isinstance(scalar, Tensor):
            raise ContractViolation("division is supported by scalars only")
        s = float(scalar)
        data = self.data / s
        _emit(divs=data.size)

        def backward(g):
            self._accum(g / s)

        return Tensor._from_op(data, (self,), backward)

    def __matmul__(self, other):
        other = _as_tensor(other)
        if self.ndim != 2 or other.ndim != 2:
            raise ShapeMismatch(f"matmul needs 2-d operands, got {self.shape} @ {other.shape}")
        if self.shape[1] != other.shape[0]:
            raise ShapeMismatch(f"matmul inner dims differ: {self.shape} @ {other.shape}")
        m, k = self.shape
        n = other.shape[1]
        _emit(macs=m * k * n)
        data = self.data @ other.data

        def backward(g):
            self._accum(g @ other.data.T)
            other._accum(self.data.T @ g)

        return Tensor._from_op(data, (self, other), backward)

    # -- shape ops ------------------------------------------------------------

    @property
    def T(self):
        if self.ndim != 2:
            raise ShapeMismatch(f"transpose expects a matrix, got shape {self.shape}")

        def backward(g):
            self._accum(g.T)

        return Tensor._from_op(self.data.T.copy(), (self,), backward)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        old = self.shape

        def backward(g):
            self._accum(g.reshape(old))

        return Tensor._from_op(self.data.reshape(shape), (self,), backward)

    def sum(self, axis=None, keepdims=False):
        data = self.data.sum(axis=axis, keepdims=keepdims)

        def backward(g):
            if axis is None:
                self._accum(np.full(self.shape, g if np.ndim(g) == 0 else g.item()))
            else:
                gg = g if keepdims else np.expand_dims(g, axis)
                self._accum(np.broadcast_to(gg, self.shape).copy())

        return Tensor._from_op(data, (self,), backward)

    def mean(self, axis=None):
        n = self.size if axis is None else self.shape[axis]
        data = self.data.mean(axis=axis)
        _emit(divs=data.size if data.ndim else 1)

        def backward(g):
            if axis is None:
                self._accum(np.full(self.shape, float(g) / n))
            else:
                self._accum(np.broadcast_to(np.expand_dims(g, axis), self.shape) / n)

        return Tensor._from_op(data, (self,), backward)

    # -- pointwise nonlinearities ----------------------------------------------

    def exp(self):
        data = np.exp(self.data)
        _emit(exps=data.size)

        def backward(g):
            self._accum(g * data)

        return Tensor._from_op(data, (self,), backward)

    def log(self):
        data = np.log(self.data)
        _emit(exps=data.size)

        def backward(g):
            self._accum(g / self.data)

        return Tensor._from_op(data, (self,), backward)

    def sigmoid(self):
        data = 1.0 / (1.0 + np.exp(-self.data))
        _emit(exps=data.size, divs=data.size)

        def backward(g):
            self._accum(g * data * (1.0 - data))

        return Tensor._from_op(data, (self,), backward)

    def relu(self):
        data = np.maximum(self.data, 0.0)

        def backward(g):
            self._accum(g * (self.data > 0))

        return Tensor._from_op(data, (self,), backward)

    def abs(self):
        data = np.abs(self.data)

        def backward(g):
            self._accum(g * np.sign(self.data))

        return Tensor._from_op(data, (self,), backward)

    # -- softmax ----------------------------------------------------------------

    def softmax(self, axis=-1, mask=None):
        """Normalize along ``axis`` after subtracting the slice max.

        ``mask`` marks valid entries; invalid ones get an additive -inf
        before the max subtraction and come out exactly zero. A slice
        with nothing valid raises DegenerateRegion rather than NaN.
        """
        x = self.data
        if mask is not None:
            m = mask.data if isinstance(mask, Tensor) else np.asarray(mask)
            m = np.broadcast_to(m.astype(bool), x.shape)
            x = np.where(m, x, -np.inf)
        valid = ~np.isneginf(x)
        if not valid.any(axis=axis).all():
            raise DegenerateRegion("softmax slice is fully masked")
        shifted = x - x.max(axis=axis, keepdims=True)
        e = np.exp(shifted)
        total = e.sum(axis=axis, keepdims=True)
        data = e / total
        _emit(exps=data.size, divs=data.size)

        def backward(g):
            inner = (g * data).sum(axis=axis, keepdims=True)
            self._accum(data * (g - inner))

        return Tensor._from_op(data, (self,), backward)

    def reciprocal(self):
        data = 1.0 / self.data
        _emit(divs=data.size)

        def backward(g):
            self._accum(-g * data * data)

        return Tensor._from_op(data, (self,), backward)

    def take_cols(self, indices):
        """Gather matrix columns; duplicated indices replicate columns."""
        if self.ndim != 2:
            raise ShapeMismatch(f"take_cols expects a matrix, got shape {self.shape}")
        idx = np.asarray(indices, dtype=np.int64)
        if idx.ndim != 1:
            raise ContractViolation("take_cols needs a flat index list")
        if idx.size and (idx.min() < 0 or idx.max() >= self.shape[1]):
            raise ContractViolation(f"index out of range for {self.shape[1]} columns")

        def backward(g):
            gt = np.zeros_like(self.data.T)
            np.add.at(gt, idx, g.T)
            self._accum(gt.T)

        return Tensor._from_op(self.data[:, idx].copy(), (self,), backward)

    def slice_cols(self, start, stop):
        """Columns [start, stop) of a matrix as a fresh tensor."""
        if self.ndim != 2:
            raise ShapeMismatch(f"slice_cols expects a matrix, got shape {self.shape}")

        def backward(g):
            gt = np.zeros_like(self.data)
            gt[:, start:stop] = g
            self._accum(gt)

        return Tensor._from_op(self.data[:, start:stop].copy(), (self,), backward)

    # -- gathers ------------------------------------------------------------------

    def take_rows(self, indices, oob_zero=False):
        """Index axis 0 with an integer array of any shape.

        Result shape is ``indices.shape + self.shape[1:]``. With
        ``oob_zero`` out-of-range rows read as zeros and receive no
        gradient, which is the boundary convention for spatial sampling.
        """
        idx = np.asarray(indices, dtype=np.int64)
        n = self.shape[0]
        if oob_zero:
            ok = (idx >= 0) & (idx < n)
            safe = np.where(ok, idx, 0)
            data = self.data[safe]
            data[~ok] = 0.0
        else:
            if idx.size and (idx.min() < 0 or idx.max() >= n):
                raise ContractViolation(f"index out of range for {n} rows")
            ok = np.ones(idx.shape, dtype=bool)
            safe = idx
            data = self.data[safe]

        def backward(g):
            gt = np.zeros_like(self.data)
            flat_idx = safe.reshape(-1)
            flat_ok = ok.reshape(-1)
            gflat = g.reshape(-1, *self.shape[1:])
            np.add.at(gt, flat_idx[flat_ok], gflat[flat_ok])
            self._accum(gt)

        return Tensor._from_op(data, (self,), backward)

    # -- autodiff ----------------------------------------------------------------

    def _accum(self, g):
        if not (self.requires_grad or self._parents):
            return
        if self.grad is None:
            self.grad = np.zeros(self.shape)
        self.grad += g

    def backward(self):
        """Reverse-sweep from a scalar loss, accumulating leaf grads."""
        if self.size != 1:
            raise ContractViolation(f"backward needs a scalar loss, got shape {self.shape}")
        order = []
        seen = set()
        stack = [(self, False)]
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
                stack.append((p, False))
        self.grad = np.ones(self.shape)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
        # intermediate grads are per-tape scratch; keep only leaf grads
        for node in order:
            if node._parents:
                node.grad = None


class Rng:
    """Deterministic random stream (numpy PCG64 keyed by a seed tuple).

    ``child(k)`` derives an independent stream, so components can split
    randomness without coordinating draw order.
    """

    def __init__(self, *key):
        if not key:
            raise ContractViolation("Rng needs at least one integer key")
        self.key = tuple(int(k) for k in key)
        self._gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.key)))

    def child(self, *branch):
        return Rng(*self.key, *branch)

    def uniform(self, low, high, shape=None):
        return self._gen.uniform(low, high, shape)

    def normal(self, shape=None, scale=1.0):
        return self._gen.normal(0.0, scale, shape)

    def integers(self, low, high, shape=None):
        return self._gen.integers(low, high, size=shape)

    def permutation(self, n):
        return self._gen.permutation(n)

    def choice(self, n, size, replace=False):
        return self._gen.choice(n, size=size, replace=replace)

    def param(self, shape, fan_in, requires_grad=True, lr_scale=1.0):
        """Fresh parameter, uniform in +-sqrt(1/fan_in)."""
        bound = float(np.sqrt(1.0 / fan_in))
        data = self._gen.uniform(-bound, bound, shape)
        return Tensor(data, requires_grad=requires_grad, lr_scale=lr_scale)


def zeros(shape, requires_grad=False, lr_scale=1.0):
    return Tensor(np.zeros(shape), requires_grad=requires_grad, lr_scale=lr_scale)


def finite_diff_check(f, params, step=1e-5):
    """Compare tape gradients of ``sum(f())`` against central differences.

    ``f`` rebuilds its forward pass from the current ``params`` data on
    every call. Returns the max over parameter entries of
    ``|analytic - numeric| / (|numeric| + 1e-8)``.
    """
    for p in params:
        p.grad = None
    out = f()
    if not np.isfinite(out.data).all():
        raise NumericFault("objective produced non-finite values")
    scalar = out if out.size == 1 else out.sum()
    scalar.backward()

    worst = 0.0
    for p in params:
        analytic = np.zeros(p.shape) if p.grad is None else p.grad.copy()
        flat = p.data.reshape(-1)
        aflat = analytic.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + step
            hi = float(f().data.sum())
            flat[i] = keep - step
            lo = float(f().data.sum())
            flat[i] = keep
            if not (np.isfinite(hi) and np.isfinite(lo)):
                raise NumericFault("objective produced non-finite values during probing")
            numeric = (hi - lo) / (2.0 * step)
            rel = abs(aflat[i] - numeric) / (abs(numeric) + 1e-8)
            worst = max(worst, rel)
    return worst
