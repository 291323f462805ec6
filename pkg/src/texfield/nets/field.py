"""The texture field network ``(p, s, z) -> rgb``."""

from __future__ import annotations

import numpy as np

from texfield.autodiff import Linear, Module, Tensor, concat
from texfield.errors import ContractError
from texfield.nets.layers import ResnetBlockFC


class TextureField(Module):
    """Per-point residual MLP conditioned on a shape embedding and a latent code.

    Points are lifted to ``hidden`` features; before each of the ``n_blocks``
    residual blocks a linear projection of ``concat(s, z)`` is added to every
    point's features. A final ReLU + linear layer maps to RGB and a sigmoid
    bounds the output to (0, 1). The output layer starts at zero, so an
    untrained field predicts mid-gray everywhere.
    """

    def __init__(self, n_blocks: int, hidden: int, s_dim: int, z_dim: int, rng: np.random.Generator):
        self.n_blocks = n_blocks
        self.hidden = hidden
        self.s_dim = s_dim
        self.z_dim = z_dim
        self.fc_p = Linear(3, hidden, rng)
        self.fc_c = [Linear(s_dim + z_dim, hidden, rng) for _ in range(n_blocks)]
        self.blocks = [ResnetBlockFC(hidden, rng) for _ in range(n_blocks)]
        self.fc_out = Linear(hidden, 3, rng, init="zeros")

    def forward(self, p, s, z, index=None) -> Tensor:
        """Colors for points ``p``.

        Args:
            p: (N, 3) points, or (B, N, 3) with one condition row per batch item.
            s: shape embedding, (s_dim,) or (B, s_dim).
            z: latent code, (z_dim,) or (B, z_dim).
            index: optional (N,) integer array assigning each row of a flat
                ``p`` to a row of ``s``/``z``.

        Returns:
            Tensor of colors with the leading shape of ``p`` and 3 channels.
        """
        p = p if isinstance(p, Tensor) else Tensor(p, dtype=self.fc_p.weight.dtype)
        s = s if isinstance(s, Tensor) else Tensor(s, dtype=p.dtype)
        z = z if isinstance(z, Tensor) else Tensor(z, dtype=p.dtype)
        if s.shape[-1] != self.s_dim or z.shape[-1] != self.z_dim:
            raise ContractError(
                f"field expects s/z dims {self.s_dim}/{self.z_dim}, got {s.shape[-1]}/{z.shape[-1]}"
            )
        if p.shape[-1] != 3:
            raise ContractError(f"points must have 3 coordinates, got shape {p.shape}")
        if s.ndim == 1:
            s = s.reshape(1, -1)
        if z.ndim == 1:
            z = z.reshape(1, -1)
        c = concat([s, z], axis=-1)
        net = self.fc_p(p)
        for fc, block in zip(self.fc_c, self.blocks):
            proj = fc(c)
            if index is not None:
                proj = proj[np.asarray(index)]
            elif p.ndim == 3:
                proj = proj.reshape(proj.shape[0], 1, -1)
            net = block(net + proj)
        return self.fc_out(net.relu()).sigmoid()
