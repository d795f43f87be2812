"""Minimal reverse-mode autodiff over float64 numpy arrays."""

from .gradcheck import grad_check, grad_check_params, numerical_grad
from .linalg import NotPositiveDefiniteError, cholesky, logdet_psd
from .ops import (
    add,
    concat,
    cross_entropy,
    exp,
    expand,
    gelu,
    layer_norm,
    matmul,
    mean,
    mse,
    mul,
    permute,
    reshape,
    scale,
    slice_axis,
    softmax,
    sub,
    take,
    transpose,
    tsum,
)
from .tensor import (
    ComputationRecord,
    GraphError,
    NonFiniteError,
    ShapeError,
    Tensor,
    as_tensor,
    backward,
)

__all__ = [
    "ComputationRecord",
    "GraphError",
    "NonFiniteError",
    "NotPositiveDefiniteError",
    "ShapeError",
    "Tensor",
    "add",
    "as_tensor",
    "backward",
    "cholesky",
    "concat",
    "cross_entropy",
    "exp",
    "expand",
    "gelu",
    "grad_check",
    "grad_check_params",
    "layer_norm",
    "logdet_psd",
    "matmul",
    "mean",
    "mse",
    "mul",
    "numerical_grad",
    "permute",
    "reshape",
    "scale",
    "slice_axis",
    "softmax",
    "sub",
    "take",
    "transpose",
    "tsum",
]
