"""Reverse-mode automatic differentiation on numpy arrays, plus Adam."""

from texfield.autodiff.checkpoint import (
    load_adam_state,
    load_tensors,
    optimizer_path,
    save_adam_state,
    save_tensors,
)
from texfield.autodiff.gradcheck import numerical_grad, relative_error
from texfield.autodiff.module import Linear, Module, kaiming_uniform
from texfield.autodiff.optim import Adam, AdamState, adam_step
from texfield.autodiff.tensor import (
    DEFAULT_DTYPE,
    Tensor,
    concat,
    exp,
    is_grad_enabled,
    linear,
    matmul,
    no_grad,
    ones,
    relu,
    sigmoid,
    tensor,
    zeros,
)

__all__ = [
    "Adam", "AdamState", "DEFAULT_DTYPE", "Linear", "Module", "Tensor", "adam_step",
    "concat", "exp", "is_grad_enabled", "kaiming_uniform", "linear", "load_adam_state",
    "load_tensors", "matmul", "no_grad", "numerical_grad", "ones", "optimizer_path",
    "relative_error", "relu", "save_adam_state", "save_tensors", "sigmoid", "tensor", "zeros",
]
