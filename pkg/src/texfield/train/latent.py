"""Latent-space utilities: prior sampling and linear interpolation."""

from __future__ import annotations

import numpy as np

from texfield.autodiff import DEFAULT_DTYPE
from texfield.errors import ContractError


def sample_prior(dim: int, seed: int = 0, n: int | None = None, dtype=DEFAULT_DTYPE) -> np.ndarray:
    """Standard-normal latent code(s): shape (dim,) or (n, dim)."""
    if dim < 1:
        raise ContractError(f"latent dim must be >= 1, got {dim}")
    shape = (dim,) if n is None else (n, dim)
    return np.random.default_rng(seed).standard_normal(shape).astype(dtype)


def interpolate_latent(z_a, z_b, steps: int) -> list[np.ndarray]:
    """``steps`` codes evenly spaced from ``z_a`` to ``z_b`` inclusive."""
    z_a = np.asarray(getattr(z_a, "data", z_a))
    z_b = np.asarray(getattr(z_b, "data", z_b))
    if z_a.shape != z_b.shape:
        raise ContractError(f"latent shapes differ: {z_a.shape} vs {z_b.shape}")
    if steps < 2:
        raise ContractError(f"need at least 2 steps, got {steps}")
    ts = np.linspace(0.0, 1.0, steps)
    return [((1.0 - t) * z_a + t * z_b).astype(z_a.dtype) for t in ts]
