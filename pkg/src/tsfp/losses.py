"""Reconstruction and coding-rate objectives, plus the Gaussian total correlation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, logdet_psd, matmul, mean, mse, reshape, scale, transpose
from .autodiff.linalg import cholesky, logdet_from_cholesky
from .autodiff.tensor import ShapeError


@dataclass
class ObjectiveConfig:
    lam: float = 1e-4
    eps: float = 0.5
    mask_ratio: float = 0.6
    # "per_sample": coding rate of each sample's own k tokens, averaged;
    # "batch": one coding rate over all tokens of the batch.
    tcr_pooling: str = "per_sample"

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam: must be >= 0")
        if self.eps <= 0:
            raise ValueError("eps: must be > 0")
        if not 0 <= self.mask_ratio < 1:
            raise ValueError("mask_ratio: must be in [0, 1)")
        if self.tcr_pooling not in ("per_sample", "batch"):
            raise ValueError("tcr_pooling: must be 'per_sample' or 'batch'")


def reconstruction_loss(pred: Tensor, target) -> Tensor:
    """MSE over the masked patch values only (callers pass masked patches)."""
    if pred.size == 0:
        raise ShapeError("no masked patches to reconstruct")
    return mse(pred, target)


def gram_matrix(tokens: np.ndarray) -> np.ndarray:
    """k x k inner products of token rows."""
    tokens = np.asarray(tokens, dtype=np.float64)
    return tokens @ np.swapaxes(tokens, -1, -2)


def _coding_gain(k: int, d: int, eps: float) -> float:
    return d / (k * eps * eps)


def tcr_diversity_loss(tokens: Tensor, eps: float = 0.5, pooling: str = "per_sample") -> Tensor:
    """``-1/2 log det(I_k + d/(k eps^2) F F^T)`` for tokens ``F`` of shape (k, d).

    A leading batch axis is allowed. With ``pooling="per_sample"`` each
    sample's rate is computed on its own tokens and the result is averaged;
    ``"batch"`` pools every token of the batch into one set.
    """
    if tokens.ndim not in (2, 3):
        raise ShapeError(f"tokens must be (k,d) or (B,k,d), got {tokens.shape}")
    if eps <= 0:
        raise ValueError("eps must be > 0")
    if pooling == "batch" and tokens.ndim == 3:
        b, k, d = tokens.shape
        tokens = reshape(tokens, (b * k, d))
    k, d = tokens.shape[-2:]
    gram = matmul(tokens, transpose(tokens))
    eye = np.broadcast_to(np.eye(k), gram.shape)
    ld = logdet_psd(scale(gram, _coding_gain(k, d, eps)) + eye)
    if ld.ndim:
        ld = mean(ld)
    return scale(ld, -0.5)


def tcr_feature_form(tokens: np.ndarray, eps: float = 0.5) -> float:
    """Same quantity via the d x d matrix ``I_d + c F^T F`` (for cross-checks)."""
    tokens = np.asarray(tokens, dtype=np.float64)
    k, d = tokens.shape
    m = np.eye(d) + _coding_gain(k, d, eps) * tokens.T @ tokens
    return -0.5 * float(logdet_from_cholesky(cholesky(0.5 * (m + m.T))))


def total_loss(rec: Tensor, div: Tensor, lam: float) -> Tensor:
    if lam < 0:
        raise ValueError("lam must be >= 0")
    return rec + scale(div, lam)


def gaussian_total_correlation(cov: np.ndarray) -> float:
    """``1/2 (sum_i log S_ii - log det S)`` for a positive-definite covariance.

    Raises :class:`~tsfp.autodiff.NotPositiveDefiniteError` otherwise.
    """
    cov = np.asarray(cov, dtype=np.float64)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ShapeError(f"covariance must be square, got {cov.shape}")
    sym = 0.5 * (cov + cov.T)
    ld = float(logdet_from_cholesky(cholesky(sym)))
    return 0.5 * (float(np.sum(np.log(np.diag(sym)))) - ld)
