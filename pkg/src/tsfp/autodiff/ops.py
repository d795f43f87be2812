"""Differentiable operations on :class:`~tsfp.autodiff.tensor.Tensor`.

Broadcasting is deliberately narrow: a second operand may be a scalar
(shape ``()``) or a row vector matching the last axis. Everything else must
match exactly. Batched matmul accepts either equal leading dims or a shared
2-D right operand (a weight matrix).
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .tensor import ShapeError, Tensor, as_tensor, make_result

_GELU_C = math.sqrt(2.0 / math.pi)


def _broadcast_kind(full: tuple, other: tuple) -> str:
    if other == full:
        return "same"
    if other == ():
        return "scalar"
    if len(other) == 1 and len(full) >= 1 and other[0] == full[-1]:
        return "row"
    raise ShapeError(f"shapes {full} and {other} do not conform")


def _reduce_to(g: np.ndarray, kind: str) -> np.ndarray:
    if kind == "same":
        return g
    if kind == "scalar":
        return np.asarray(g.sum())
    return g.reshape(-1, g.shape[-1]).sum(axis=0)


def _order(a: Tensor, b: Tensor) -> tuple[str, str]:
    """Broadcast kinds for (a, b) relative to the larger operand."""
    if a.shape == b.shape:
        return "same", "same"
    if a.ndim >= b.ndim and a.size >= b.size:
        return "same", _broadcast_kind(a.shape, b.shape)
    return _broadcast_kind(b.shape, a.shape), "same"


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    ka, kb = _order(a, b)

    def bw(g):
        return _reduce_to(g, ka), _reduce_to(g, kb)

    return make_result("add", a.data + b.data, (a, b), bw)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    ka, kb = _order(a, b)

    def bw(g):
        return _reduce_to(g, ka), -_reduce_to(g, kb)

    return make_result("sub", a.data - b.data, (a, b), bw)


def mul(a, b) -> Tensor:
    """Elementwise product (same shape, scalar or row-vector operand)."""
    a, b = as_tensor(a), as_tensor(b)
    ka, kb = _order(a, b)

    def bw(g):
        return _reduce_to(g * b.data, ka), _reduce_to(g * a.data, kb)

    return make_result("mul", a.data * b.data, (a, b), bw)


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    return make_result("scale", a.data * c, (a,), lambda g: (g * c,))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError("matmul needs operands with at least 2 dims")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dims differ: {a.shape} @ {b.shape}")
    shared = b.ndim == 2 and a.ndim > 2
    if not shared and a.shape[:-2] != b.shape[:-2]:
        raise ShapeError(f"matmul batch dims differ: {a.shape} @ {b.shape}")
    out = a.data @ b.data

    def bw(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        if shared:
            n, p = b.shape
            gb = a.data.reshape(-1, n).T @ g.reshape(-1, p)
        else:
            gb = np.swapaxes(a.data, -1, -2) @ g
        return ga, gb

    return make_result("matmul", out, (a, b), bw)


def transpose(a: Tensor) -> Tensor:
    """Swap the last two axes."""
    if a.ndim < 2:
        raise ShapeError("transpose needs at least 2 dims")
    return make_result(
        "transpose", np.swapaxes(a.data, -1, -2), (a,), lambda g: (np.swapaxes(g, -1, -2),)
    )


def permute(a: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    if sorted(axes) != list(range(a.ndim)):
        raise ShapeError(f"bad permutation {axes} for {a.ndim}-d tensor")
    inv = tuple(int(i) for i in np.argsort(axes))
    return make_result("permute", np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inv),))


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)
    try:
        out = a.data.reshape(shape)
    except ValueError as exc:
        raise ShapeError(str(exc)) from None
    src = a.shape
    return make_result("reshape", out, (a,), lambda g: (g.reshape(src),))


def expand(a: Tensor, n: int) -> Tensor:
    """Stack ``n`` copies of ``a`` along a new leading axis."""
    out = np.broadcast_to(a.data, (n,) + a.shape).copy()
    return make_result("expand", out, (a,), lambda g: (g.sum(axis=0),))


def softmax(a: Tensor) -> Tensor:
    """Softmax over the last axis."""
    z = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=-1, keepdims=True)

    def bw(g):
        return (y * (g - (g * y).sum(axis=-1, keepdims=True)),)

    return make_result("softmax", y, (a,), bw)


def layer_norm(x: Tensor, gain: Tensor | None = None, bias: Tensor | None = None, eps: float = 1e-5) -> Tensor:
    """Normalise over the last axis with population variance."""
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / np.sqrt(var + eps)
        xhat = xc * inv
    out = xhat
    inputs: list[Tensor] = [x]
    if gain is not None:
        if gain.shape != (x.shape[-1],):
            raise ShapeError(f"layer_norm gain shape {gain.shape} vs {x.shape}")
        out = out * gain.data
        inputs.append(gain)
    if bias is not None:
        if bias.shape != (x.shape[-1],):
            raise ShapeError(f"layer_norm bias shape {bias.shape} vs {x.shape}")
        out = out + bias.data
        inputs.append(bias)

    def bw(g):
        gx_hat = g * gain.data if gain is not None else g
        gx = inv * (
            gx_hat
            - gx_hat.mean(axis=-1, keepdims=True)
            - xhat * (gx_hat * xhat).mean(axis=-1, keepdims=True)
        )
        res = [gx]
        if gain is not None:
            res.append((g * xhat).reshape(-1, x.shape[-1]).sum(axis=0))
        if bias is not None:
            res.append(g.reshape(-1, x.shape[-1]).sum(axis=0))
        return res

    return make_result("layer_norm", out, inputs, bw)


def gelu(x: Tensor) -> Tensor:
    """GELU, tanh form: ``0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))``."""
    x2 = x.data * x.data
    u = _GELU_C * x.data * (1.0 + 0.044715 * x2)
    th = np.tanh(u)
    y = 0.5 * x.data * (1.0 + th)

    def bw(g):
        du = _GELU_C * (1.0 + 3 * 0.044715 * x2)
        return (g * (0.5 * (1.0 + th) + 0.5 * x.data * (1.0 - th * th) * du),)

    return make_result("gelu", y, (x,), bw)


def exp(x: Tensor) -> Tensor:
    with np.errstate(over="ignore"):
        y = np.exp(x.data)
    return make_result("exp", y, (x,), lambda g: (g * y,))


def tsum(x: Tensor, axis: int | None = None) -> Tensor:
    shape = x.shape
    out = np.asarray(x.data.sum(axis=axis))

    def bw(g):
        if axis is None:
            return (np.full(shape, float(g)),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return make_result("sum", out, (x,), bw)


def mean(x: Tensor, axis: int | None = None) -> Tensor:
    n = x.size if axis is None else x.shape[axis]
    return scale(tsum(x, axis), 1.0 / n)


def slice_axis(x: Tensor, axis: int, start: int, stop: int) -> Tensor:
    axis = axis % x.ndim
    if not 0 <= start < stop <= x.shape[axis]:
        raise ShapeError(f"slice [{start}:{stop}] out of range for axis of size {x.shape[axis]}")
    idx = [slice(None)] * x.ndim
    idx[axis] = slice(start, stop)
    idx = tuple(idx)

    def bw(g):
        full = np.zeros(x.shape)
        full[idx] = g
        return (full,)

    return make_result("slice", x.data[idx].copy(), (x,), bw)


def concat(xs: Sequence[Tensor], axis: int = 0) -> Tensor:
    xs = [as_tensor(t) for t in xs]
    if not xs:
        raise ShapeError("concat of nothing")
    ax = axis % xs[0].ndim
    ref = xs[0].shape[:ax] + xs[0].shape[ax + 1:]
    for t in xs[1:]:
        if t.ndim != xs[0].ndim or t.shape[:ax] + t.shape[ax + 1:] != ref:
            raise ShapeError(f"concat shapes differ off-axis: {xs[0].shape} vs {t.shape}")
    bounds = np.cumsum([0] + [t.shape[ax] for t in xs])

    def bw(g):
        out = []
        for i in range(len(xs)):
            sl = [slice(None)] * g.ndim
            sl[ax] = slice(int(bounds[i]), int(bounds[i + 1]))
            out.append(g[tuple(sl)])
        return out

    return make_result("concat", np.concatenate([t.data for t in xs], axis=ax), xs, bw)


def take(x: Tensor, index: np.ndarray) -> Tensor:
    """Per-batch row gather: ``out[b, m] = x[b, index[b, m]]`` for 3-d ``x``."""
    index = np.asarray(index, dtype=np.int64)
    if x.ndim != 3 or index.ndim != 2 or index.shape[0] != x.shape[0]:
        raise ShapeError(f"take expects x (B,N,D) and index (B,M); got {x.shape}, {index.shape}")
    if index.size and (index.min() < 0 or index.max() >= x.shape[1]):
        raise ShapeError("take index out of range")
    rows = np.arange(x.shape[0])[:, None]
    out = x.data[rows, index]

    def bw(g):
        full = np.zeros(x.shape)
        np.add.at(full, (rows, index), g)
        return (full,)

    return make_result("take", out, (x,), bw)


def mse(pred: Tensor, target) -> Tensor:
    """Mean of squared differences over all entries."""
    target = as_tensor(target)
    if pred.shape != target.shape:
        raise ShapeError(f"mse shapes differ: {pred.shape} vs {target.shape}")
    if pred.size == 0:
        raise ShapeError("mse of empty tensors")
    diff = pred.data - target.data
    n = diff.size

    def bw(g):
        gd = (2.0 / n) * float(g) * diff
        return gd, -gd

    return make_result("mse", np.asarray((diff * diff).mean()), (pred, target), bw)


def cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean softmax cross-entropy for (B, C) logits and integer labels."""
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeError(f"cross_entropy expects (B,C) logits and (B,) labels; got {logits.shape}, {labels.shape}")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    b = logits.shape[0]
    loss = -logp[np.arange(b), labels].mean()

    def bw(g):
        p = np.exp(logp)
        p[np.arange(b), labels] -= 1.0
        return (float(g) * p / b,)

    return make_result("cross_entropy", np.asarray(loss), (logits,), bw)
