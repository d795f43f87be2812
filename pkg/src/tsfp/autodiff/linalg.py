"""Cholesky factorisation and a differentiable log-determinant."""

from __future__ import annotations

import numpy as np

from .tensor import ShapeError, Tensor, as_tensor, make_result


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Cholesky hit a non-positive pivot."""

    def __init__(self, pivot: int, value: float):
        super().__init__(f"matrix is not positive definite: pivot {pivot} is {value:.6g}")
        self.pivot = pivot
        self.value = value


def cholesky(a: np.ndarray) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L.T == a``; batched over leading axes.

    Column-by-column (Cholesky-Banachiewicz) so the first failing pivot can
    be reported.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ShapeError(f"cholesky needs square matrices, got {a.shape}")
    n = a.shape[-1]
    L = np.zeros_like(a)
    for j in range(n):
        row = L[..., j, :j]
        piv = a[..., j, j] - np.einsum("...i,...i->...", row, row)
        bad = ~(piv > 0.0)
        if np.any(bad):
            raise NotPositiveDefiniteError(j, float(np.min(np.where(bad, piv, np.inf))))
        d = np.sqrt(piv)
        L[..., j, j] = d
        if j + 1 < n:
            below = a[..., j + 1:, j] - np.einsum("...ri,...i->...r", L[..., j + 1:, :j], row)
            L[..., j + 1:, j] = below / d[..., None]
    return L


def logdet_from_cholesky(L: np.ndarray) -> np.ndarray:
    return 2.0 * np.log(np.diagonal(L, axis1=-2, axis2=-1)).sum(axis=-1)


def logdet_psd(a: Tensor) -> Tensor:
    """``log det`` of a symmetric positive-definite matrix (or a batch).

    The input is symmetrised first; the gradient is the symmetric inverse.
    """
    a = as_tensor(a)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ShapeError(f"logdet_psd needs square matrices, got {a.shape}")
    sym = 0.5 * (a.data + np.swapaxes(a.data, -1, -2))
    L = cholesky(sym)
    out = logdet_from_cholesky(L)

    def bw(g):
        Linv = np.linalg.inv(L)
        ainv = np.swapaxes(Linv, -1, -2) @ Linv
        ainv = 0.5 * (ainv + np.swapaxes(ainv, -1, -2))
        return (np.asarray(g)[..., None, None] * ainv,)

    return make_result("logdet_psd", np.asarray(out), (a,), bw)
