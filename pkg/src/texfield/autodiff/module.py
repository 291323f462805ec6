"""Parameter containers: a minimal ``Module`` and the ``Linear`` layer."""

from __future__ import annotations

from collections import OrderedDict

import numpy as np

from texfield.autodiff.tensor import DEFAULT_DTYPE, Tensor, linear
from texfield.errors import ContractError, DimensionError


class Module:
    """Base class that discovers parameters from instance attributes.

    Attributes that are gradient-requiring :class:`Tensor` objects are
    parameters; attributes that are modules (or lists of modules) are
    recursed into. Names follow attribute order, e.g. ``blocks.0.fc_0.weight``.
    """

    def named_parameters(self, prefix: str = "") -> "OrderedDict[str, Tensor]":
        out: OrderedDict[str, Tensor] = OrderedDict()
        for key, val in vars(self).items():
            if key.startswith("_"):
                continue
            name = f"{prefix}{key}"
            if isinstance(val, Tensor) and val.requires_grad:
                out[name] = val
            elif isinstance(val, Module):
                out.update(val.named_parameters(name + "."))
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        out.update(item.named_parameters(f"{name}.{i}."))
        return out

    def parameters(self) -> list[Tensor]:
        return list(self.named_parameters().values())

    def num_parameters(self) -> int:
        return int(sum(p.size for p in self.parameters()))

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def state_dict(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict((k, v.data.copy()) for k, v in self.named_parameters().items())

    def load_state_dict(self, state) -> None:
        params = self.named_parameters()
        missing = set(params) - set(state)
        unexpected = set(state) - set(params)
        if missing or unexpected:
            raise ContractError(
                f"state mismatch: missing {sorted(missing)}, unexpected {sorted(unexpected)}"
            )
        for k, p in params.items():
            arr = np.asarray(state[k])
            if arr.shape != p.shape:
                raise DimensionError(f"parameter {k}: expected shape {p.shape}, got {arr.shape}")
            p.data = arr.astype(p.dtype).copy()

    def to(self, dtype) -> "Module":
        """Cast every parameter in place (e.g. to float64 for gradient checks)."""
        for p in self.parameters():
            p.data = p.data.astype(dtype)
            p.grad = None
        return self

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):  # pragma: no cover - abstract
        raise NotImplementedError


def kaiming_uniform(fan_in: int, fan_out: int, rng: np.random.Generator, dtype=DEFAULT_DTYPE) -> np.ndarray:
    """He/Kaiming uniform initialisation with ReLU gain for a (fan_in, fan_out) matrix."""
    if fan_in == 0:
        return np.zeros((0, fan_out), dtype=dtype)
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(dtype)


class Linear(Module):
    """Fully connected layer ``y = x W + b`` acting on the last axis.

    ``init='zeros'`` yields an all-zero layer (used for output heads).
    """

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator,
                 bias: bool = True, init: str = "kaiming", dtype=DEFAULT_DTYPE):
        self.in_features = in_features
        self.out_features = out_features
        if init == "kaiming":
            w = kaiming_uniform(in_features, out_features, rng, dtype)
        elif init == "zeros":
            w = np.zeros((in_features, out_features), dtype=dtype)
        else:
            raise ValueError(f"unknown init {init!r}")
        self.weight = Tensor(w, requires_grad=True)
        self.bias = Tensor(np.zeros(out_features, dtype=dtype), requires_grad=True) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return linear(x, self.weight, self.bias)
