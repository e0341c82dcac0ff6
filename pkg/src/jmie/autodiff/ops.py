"""Primitive tensor operations with exact vector-Jacobian backward rules.

Shape discipline is deliberately narrow: 2-D matmul, elementwise ops on
identical shapes, and the single broadcast form matrix + bias-vector (plus
scalars). Everything the encoder, the three decoders, and AdamW need is
composed from these.
"""

from __future__ import annotations

import numpy as np

from .tensor import ShapeMismatch, Tensor, record_op


def _g(p: Tensor, g: np.ndarray) -> None:
    if p.requires_grad:
        p.accumulate_grad(g)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeMismatch(f"matmul {a.data.shape} @ {b.data.shape}")
    out = a.data @ b.data

    def backward(g):
        _g(a, g @ b.data.T)
        _g(b, a.data.T @ g)

    return record_op(out, (a, b), backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    sa, sb = a.data.shape, b.data.shape
    if sa == sb:
        def backward(g):
            _g(a, g)
            _g(b, g)
    elif a.data.ndim == 2 and sb == (sa[1],):
        # matrix + bias vector, broadcast over rows
        def backward(g):
            _g(a, g)
            _g(b, g.sum(axis=0))
    elif sb == ():
        def backward(g):
            _g(a, g)
            _g(b, g.sum())
    elif sa == ():
        def backward(g):
            _g(a, g.sum())
            _g(b, g)
    else:
        raise ShapeMismatch(f"add {sa} + {sb}")
    return record_op(a.data + b.data, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeMismatch(f"sub {a.data.shape} - {b.data.shape}")

    def backward(g):
        _g(a, g)
        _g(b, -g)

    return record_op(a.data - b.data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    sa, sb = a.data.shape, b.data.shape
    if not (sa == sb or sa == () or sb == ()):
        raise ShapeMismatch(f"mul {sa} * {sb}")

    def backward(g):
        ga = g * b.data
        gb = g * a.data
        _g(a, ga.sum() if sa == () and sb != () else ga)
        _g(b, gb.sum() if sb == () and sa != () else gb)

    return record_op(a.data * b.data, (a, b), backward)


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)

    def backward(g):
        _g(a, g * c)

    return record_op(a.data * c, (a,), backward)


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)

    def backward(g):
        _g(a, g * (1.0 - out * out))

    return record_op(out, (a,), backward)


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    out = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))

    def backward(g):
        _g(a, g * out * (1.0 - out))

    return record_op(out, (a,), backward)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = list(tensors)
    if not tensors:
        raise ShapeMismatch("concat of zero tensors")
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            _g(t, g[tuple(idx)])

    return record_op(out, tuple(tensors), backward)


def narrow(a: Tensor, axis: int, start: int, length: int) -> Tensor:
    if not (0 <= start and start + length <= a.data.shape[axis]):
        raise ShapeMismatch(f"narrow [{start}:{start + length}] on axis {axis} of {a.data.shape}")
    idx = [slice(None)] * a.data.ndim
    idx[axis] = slice(start, start + length)
    idx = tuple(idx)

    def backward(g):
        if a.requires_grad:
            full = np.zeros_like(a.data)
            full[idx] = g
            a.accumulate_grad(full)

    return record_op(a.data[idx].copy(), (a,), backward)


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeMismatch(f"transpose expects a matrix, got {a.data.shape}")

    def backward(g):
        _g(a, g.T)

    return record_op(a.data.T.copy(), (a,), backward)


def reshape(a: Tensor, shape) -> Tensor:
    def backward(g):
        _g(a, g.reshape(a.data.shape))

    return record_op(a.data.reshape(shape).copy(), (a,), backward)


def flip(a: Tensor, axis: int = 0) -> Tensor:
    def backward(g):
        _g(a, np.flip(g, axis=axis))

    return record_op(np.flip(a.data, axis=axis).copy(), (a,), backward)


def tsum(a: Tensor, axis: int | None = None) -> Tensor:
    out = a.data.sum(axis=axis)

    def backward(g):
        if axis is None:
            _g(a, np.broadcast_to(g, a.data.shape).copy())
        else:
            _g(a, np.broadcast_to(np.expand_dims(g, axis), a.data.shape).copy())

    return record_op(out, (a,), backward)


def mean(a: Tensor) -> Tensor:
    return scale(tsum(a), 1.0 / a.data.size)


def softmax(a: Tensor, axis: int = -1, mask: np.ndarray | None = None) -> Tensor:
    """Softmax along ``axis``; positions where ``mask`` is 0 get probability 0."""
    x = a.data
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != x.shape:
            raise ShapeMismatch(f"softmax mask {mask.shape} vs data {x.shape}")
        x = np.where(mask, x, -np.inf)
    m = np.max(x, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)  # fully-masked slices
    e = np.exp(x - m)
    denom = e.sum(axis=axis, keepdims=True)
    out = e / np.where(denom > 0, denom, 1.0)

    def backward(g):
        inner = (g * out).sum(axis=axis, keepdims=True)
        _g(a, out * (g - inner))

    return record_op(out, (a,), backward)


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    x = a.data
    m = np.max(x, axis=axis, keepdims=True)
    lse = m + np.log(np.exp(x - m).sum(axis=axis, keepdims=True))
    out = x - lse
    p = np.exp(out)

    def backward(g):
        _g(a, g - p * g.sum(axis=axis, keepdims=True))

    return record_op(out, (a,), backward)


def logsumexp(a: Tensor, axis: int) -> Tensor:
    x = a.data
    m = np.max(x, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    e = np.exp(x - m)
    s = e.sum(axis=axis, keepdims=True)
    out = np.squeeze(m + np.log(s), axis=axis)
    p = e / s

    def backward(g):
        _g(a, p * np.expand_dims(g, axis))

    return record_op(out, (a,), backward)


def embedding_lookup(table: Tensor, indices) -> Tensor:
    idx = np.asarray(indices, dtype=np.intp)
    if idx.ndim != 1:
        raise ShapeMismatch(f"indices must be 1-D, got {idx.shape}")
    if table.data.ndim != 2:
        raise ShapeMismatch(f"lookup table must be a matrix, got {table.data.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= table.data.shape[0]):
        raise IndexError("embedding index out of range")
    out = table.data[idx]

    def backward(g):
        if table.requires_grad:
            if table.grad is None:
                table.grad = np.zeros_like(table.data)
            np.add.at(table.grad, idx, g)

    return record_op(out, (table,), backward)


def dropout(a: Tensor, p: float, train: bool, key: tuple = (0, 0, 0)) -> Tensor:
    """Inverted dropout with a counter-based Philox stream keyed by
    (seed, step, node serial); identical keys yield identical masks."""
    if not train or p <= 0.0:
        return a
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {p}")
    seed, step, serial = key
    k0 = (np.uint64(seed) << np.uint64(32)) ^ np.uint64(step)
    bits = np.random.Philox(key=np.array([k0, np.uint64(serial)], dtype=np.uint64))
    keep = (np.random.Generator(bits).random(a.data.shape) >= p) / (1.0 - p)

    def backward(g):
        _g(a, g * keep)

    return record_op(a.data * keep, (a,), backward)


def cross_entropy(logits: Tensor, targets, class_mask: np.ndarray | None = None) -> Tensor:
    """Mean negative log-likelihood over rows of (N, C) logits.

    ``class_mask`` (N, C) of {0,1} restricts each row's softmax support;
    every row must keep at least one admissible class containing its target.
    """
    x = logits.data
    if x.ndim != 2:
        raise ShapeMismatch(f"cross_entropy expects (N, C) logits, got {x.shape}")
    n, c = x.shape
    t = np.asarray(targets, dtype=np.intp)
    if t.shape != (n,):
        raise ShapeMismatch(f"targets shape {t.shape} for {n} rows")
    if n == 0:
        raise ShapeMismatch("cross_entropy over zero rows")
    if t.min() < 0 or t.max() >= c:
        raise IndexError("target class out of range")
    if class_mask is not None:
        mask = np.asarray(class_mask, dtype=bool)
        if mask.shape != x.shape:
            raise ShapeMismatch(f"class mask {mask.shape} vs logits {x.shape}")
        if not mask[np.arange(n), t].all():
            raise ValueError("a target class is masked out")
        x = np.where(mask, x, -np.inf)
    m = np.max(x, axis=1, keepdims=True)
    e = np.exp(x - m)
    s = e.sum(axis=1, keepdims=True)
    lse = np.squeeze(m + np.log(s), axis=1)
    nll = lse - x[np.arange(n), t]
    out = nll.mean()
    p = e / s

    def backward(g):
        if logits.requires_grad:
            d = p.copy()
            d[np.arange(n), t] -= 1.0
            logits.accumulate_grad(d * (float(g) / n))

    return record_op(np.asarray(out), (logits,), backward)


def bce_with_logits(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Mean binary cross-entropy over every element, numerically stable."""
    x = logits.data
    y = np.asarray(targets, dtype=np.float64)
    if y.shape != x.shape:
        raise ShapeMismatch(f"targets {y.shape} vs logits {x.shape}")
    if x.size == 0:
        raise ShapeMismatch("bce over zero elements")
    per = np.maximum(x, 0.0) - x * y + np.log1p(np.exp(-np.abs(x)))
    out = per.mean()
    sig = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))

    def backward(g):
        _g(logits, (sig - y) * (float(g) / x.size))

    return record_op(np.asarray(out), (logits,), backward)
