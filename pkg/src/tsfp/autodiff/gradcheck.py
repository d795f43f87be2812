from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import NonFiniteError, Tensor


def numerical_grad(fn: Callable[..., Tensor], arrays: Sequence[np.ndarray], step: float = 1e-5) -> list[np.ndarray]:
    """Central differences of a scalar function, one entry at a time."""
    arrays = [np.array(a, dtype=np.float64) for a in arrays]
    out = []
    for i, base in enumerate(arrays):
        g = np.zeros_like(base)
        flat = base.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + step
            hi = fn(*[Tensor(a) for a in arrays]).item()
            flat[j] = orig - step
            lo = fn(*[Tensor(a) for a in arrays]).item()
            flat[j] = orig
            g.reshape(-1)[j] = (hi - lo) / (2 * step)
        out.append(g)
    return out


def analytic_grad(fn: Callable[..., Tensor], arrays: Sequence[np.ndarray]) -> list[np.ndarray]:
    inputs = [Tensor(a, requires_grad=True) for a in arrays]
    y = fn(*inputs)
    y.backward()
    return [t.grad if t.grad is not None else np.zeros_like(t.data) for t in inputs]


def grad_check(fn: Callable[..., Tensor], inputs: Sequence, step: float = 1e-5) -> float:
    """Max over all input entries of |analytic - numeric| / max(1, |analytic|).

    ``fn`` receives fresh tensors (one per input) and must return a scalar.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    arrays = [np.asarray(a.data if isinstance(a, Tensor) else a, dtype=np.float64) for a in inputs]
    if not all(np.all(np.isfinite(a)) for a in arrays):
        raise NonFiniteError("grad_check inputs must be finite")
    ana = analytic_grad(fn, arrays)
    if not all(np.all(np.isfinite(g)) for g in ana):
        raise NonFiniteError("non-finite analytic gradient")
    num = numerical_grad(fn, arrays, step)
    worst = 0.0
    for ga, gn in zip(ana, num):
        if ga.size:
            worst = max(worst, float(np.max(np.abs(ga - gn) / np.maximum(1.0, np.abs(ga)))))
    return worst


def grad_check_params(loss_fn: Callable[[], Tensor], params: Sequence[Tensor], step: float = 1e-5) -> float:
    """Like :func:`grad_check`, but perturbs existing leaves in place.

    ``loss_fn`` rebuilds the graph from ``params`` on every call. Suited to a
    model whose parameters are attributes rather than function arguments.
    """
    for p in params:
        p.grad = None
    loss_fn().backward()
    ana = [p.grad.copy() if p.grad is not None else np.zeros_like(p.data) for p in params]
    worst = 0.0
    for p, ga in zip(params, ana):
        flat = p.data.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + step
            hi = loss_fn().item()
            flat[j] = orig - step
            lo = loss_fn().item()
            flat[j] = orig
            gn = (hi - lo) / (2 * step)
            a = ga.reshape(-1)[j]
            worst = max(worst, abs(a - gn) / max(1.0, abs(a)))
    for p in params:
        p.grad = None
    return worst
