"""Adam with bias correction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from texfield.autodiff.tensor import Tensor
from texfield.errors import ContractError, DimensionError, NumericError


@dataclass
class AdamState:
    """Moment buffers and hyperparameters for :func:`adam_step`."""

    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params, **hyper) -> "AdamState":
        state = cls(**hyper)
        state.m = [np.zeros_like(p.data) for p in params]
        state.v = [np.zeros_like(p.data) for p in params]
        return state


def _label(p: Tensor, i: int) -> str:
    return p.name or f"param[{i}]"


def adam_step(params: list[Tensor], state: AdamState) -> AdamState:
    """Apply one Adam update to ``params`` in place.

    Gradients are left untouched; the caller zeroes them. A parameter whose
    gradient is identically zero is skipped, so zero gradients leave the
    parameters unchanged regardless of the moment buffers.
    """
    if state.lr <= 0:
        raise ContractError(f"learning rate must be positive, got {state.lr}")
    if len(state.m) != len(params) or len(state.v) != len(params):
        raise DimensionError(
            f"Adam state holds {len(state.m)} buffers for {len(params)} parameters"
        )
    for i, p in enumerate(params):
        if p.grad is None:
            raise ContractError(f"{_label(p, i)} has no gradient")
        if state.m[i].shape != p.shape:
            raise DimensionError(
                f"{_label(p, i)}: moment shape {state.m[i].shape} != parameter shape {p.shape}"
            )
        if not np.all(np.isfinite(p.grad)):
            raise NumericError(f"non-finite gradient in {_label(p, i)}")

    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for i, p in enumerate(params):
        g = p.grad
        if not np.any(g):
            continue
        m, v = state.m[i], state.v[i]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        denom = np.sqrt(v / c2)
        denom += state.eps
        p.data -= ((state.lr / c1) * m / denom).astype(p.dtype, copy=False)
    return state


class Adam:
    """Convenience wrapper binding a parameter list to an :class:`AdamState`."""

    def __init__(self, params, lr: float = 1e-4, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.params = list(params)
        self.state = AdamState.for_params(self.params, lr=lr, beta1=beta1, beta2=beta2, eps=eps)

    def step(self) -> None:
        adam_step(self.params, self.state)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None
