"""Shape, image and VAE encoders."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from texfield.autodiff import Linear, Module, Tensor, concat
from texfield.errors import ContractError
from texfield.nets.layers import ResnetBlockFC


class ShapeEncoder(Module):
    """PointNet-style residual encoder with max pooling between blocks.

    ``fc_pos`` lifts each point to ``2 * hidden`` features; five residual
    blocks follow, and before each block after the first the per-point
    features are concatenated with their max over the point axis. The final
    max-pooled vector is projected to the embedding size, so the result is
    invariant to point order.
    """

    n_blocks = 5

    def __init__(self, hidden: int, s_dim: int, rng: np.random.Generator):
        self.fc_pos = Linear(3, 2 * hidden, rng)
        self.blocks = [ResnetBlockFC(2 * hidden, rng, size_out=hidden) for _ in range(self.n_blocks)]
        self.fc_c = Linear(hidden, s_dim, rng)

    def forward(self, points) -> Tensor:
        """(N, 3) -> (s_dim,) or (B, N, 3) -> (B, s_dim)."""
        p = points if isinstance(points, Tensor) else Tensor(points, dtype=self.fc_pos.weight.dtype)
        if p.ndim < 2 or p.shape[-1] != 3:
            raise ContractError(f"point cloud must be (..., N, 3), got {p.shape}")
        if p.shape[-2] == 0:
            raise ContractError("cannot encode an empty point cloud")
        net = self.blocks[0](self.fc_pos(p))
        for block in self.blocks[1:]:
            pooled = net.max(axis=-2, keepdims=True).broadcast_to(net.shape)
            net = block(concat([net, pooled], axis=-1))
        return self.fc_c(net.max(axis=-2).relu())


def _flatten_images(images, resolution: int, dtype) -> Tensor:
    x = images if isinstance(images, Tensor) else Tensor(images, dtype=dtype)
    if x.shape[-3:] != (resolution, resolution, 3):
        raise ContractError(
            f"encoder expects {resolution}x{resolution}x3 images, got {tuple(x.shape[-3:])}"
        )
    single = x.ndim == 3
    x = x.reshape(1 if single else x.shape[0], -1)
    return x - 0.5, single


class ImageEncoder(Module):
    """MLP image encoder: flattened image, three ReLU hidden layers, latent code."""

    def __init__(self, resolution: int, hidden: int, z_dim: int, rng: np.random.Generator):
        self.resolution = resolution
        self.fc_0 = Linear(resolution * resolution * 3, hidden, rng)
        self.fc_1 = Linear(hidden, hidden, rng)
        self.fc_2 = Linear(hidden, hidden, rng)
        self.fc_z = Linear(hidden, z_dim, rng)

    def forward(self, images) -> Tensor:
        """(R, R, 3) -> (z_dim,) or (B, R, R, 3) -> (B, z_dim)."""
        x, single = _flatten_images(images, self.resolution, self.fc_0.weight.dtype)
        h = self.fc_2(self.fc_1(self.fc_0(x).relu()).relu()).relu()
        z = self.fc_z(h)
        return z.reshape(-1) if single else z


@dataclass
class GaussianPosterior:
    """Diagonal Gaussian over the latent code, parameterised by mean and log std."""

    mu: Tensor
    log_sigma: Tensor

    @property
    def sigma(self) -> np.ndarray:
        return np.exp(self.log_sigma.data)


class VAEEncoder(Module):
    """Maps an image and a shape embedding to a :class:`GaussianPosterior`.

    The shape embedding enters by adding its linear projection to the first
    hidden layer of image features. Both output heads start at zero, so the
    initial posterior equals the standard-normal prior.
    """

    def __init__(self, resolution: int, hidden: int, s_dim: int, z_dim: int, rng: np.random.Generator):
        self.resolution = resolution
        self.fc_img = Linear(resolution * resolution * 3, hidden, rng)
        self.fc_s = Linear(s_dim, hidden, rng, bias=False)
        self.fc_1 = Linear(hidden, hidden, rng)
        self.fc_2 = Linear(hidden, hidden, rng)
        self.fc_mu = Linear(hidden, z_dim, rng, init="zeros")
        self.fc_log_sigma = Linear(hidden, z_dim, rng, init="zeros")

    def forward(self, images, s) -> GaussianPosterior:
        x, single = _flatten_images(images, self.resolution, self.fc_img.weight.dtype)
        s = s if isinstance(s, Tensor) else Tensor(s, dtype=x.dtype)
        if s.shape[-1] != self.fc_s.in_features:
            raise ContractError(f"shape embedding must have {self.fc_s.in_features} dims, got {s.shape[-1]}")
        if s.ndim == 1:
            s = s.reshape(1, -1)
        h = (self.fc_img(x) + self.fc_s(s)).relu()
        h = self.fc_2(self.fc_1(h).relu()).relu()
        mu, log_sigma = self.fc_mu(h), self.fc_log_sigma(h)
        if single:
            mu, log_sigma = mu.reshape(-1), log_sigma.reshape(-1)
        return GaussianPosterior(mu, log_sigma)


def reparameterize(post: GaussianPosterior, eps) -> Tensor:
    """``z = mu + exp(log_sigma) * eps``, differentiable in ``mu`` and ``log_sigma``."""
    eps = np.asarray(getattr(eps, "data", eps), dtype=post.mu.dtype)
    if eps.shape != post.mu.shape:
        raise ContractError(f"noise shape {eps.shape} does not match latent shape {post.mu.shape}")
    return post.mu + post.log_sigma.exp() * eps
