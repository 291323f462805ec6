"""Image-space l1 reconstruction loss, KL regulariser and the VAE objective."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from texfield.autodiff import Tensor
from texfield.errors import ContractError, NumericError
from texfield.nets import GaussianPosterior, TextureFieldModel, reparameterize


@dataclass
class Batch:
    """Flattened foreground pixels of ``size`` supervision views.

    Attributes:
        points: (M, 3) unprojected surface points of all sampled pixels.
        targets: (M, 3) ground-truth pixel colors.
        weights: (M,) per-pixel weight ``N_b / k_b`` (foreground count over
            sampled count) so the per-view sum is an unbiased estimate.
        index: (M,) batch element of each pixel.
        clouds: (U, N, 3) surface point clouds of the distinct objects.
        cloud_index: (B,) row of ``clouds`` for each element.
        images: (B, R, R, 3) condition images (conditional mode) or
            supervision images (VAE mode) at encoder resolution; may be None.
    """

    points: np.ndarray
    targets: np.ndarray
    weights: np.ndarray
    index: np.ndarray
    clouds: np.ndarray
    cloud_index: np.ndarray
    images: np.ndarray | None = None

    @property
    def size(self) -> int:
        return len(self.cloud_index)

    def validate(self) -> None:
        if self.size == 0 or len(self.points) == 0:
            raise ContractError("empty batch")
        m = len(self.points)
        if not (len(self.targets) == len(self.weights) == len(self.index) == m):
            raise ContractError("batch pixel arrays have inconsistent lengths")


def _shape_embeddings(batch: Batch, model: TextureFieldModel) -> Tensor:
    s_unique = model.encode_shape(batch.clouds)
    return s_unique[np.asarray(batch.cloud_index)]


def reconstruction_sum(batch: Batch, model: TextureFieldModel, s: Tensor, z: Tensor) -> Tensor:
    """Weighted sum over pixels of the 3-channel l1 color error."""
    pred = model.colors(batch.points.astype(model.dtype), s, z, batch.index)
    err = (pred - batch.targets.astype(model.dtype)).abs().sum(axis=-1)
    return (err * batch.weights.astype(model.dtype)).sum()


def conditional_loss(batch: Batch, model: TextureFieldModel) -> Tensor:
    """Mean over batch elements of the summed per-pixel l1 error.

    ``z`` comes from the image encoder in conditional mode and is the zero
    vector in overfit mode.
    """
    batch.validate()
    if model.mode == "vae":
        raise ContractError("conditional_loss needs a conditional or overfit model")
    s = _shape_embeddings(batch, model)
    if model.mode == "conditional":
        if batch.images is None:
            raise ContractError("conditional batch carries no condition images")
        z = model.encode_image(batch.images)
    else:
        z = model.zero_latent(batch.size)
    return reconstruction_sum(batch, model, s, z) * (1.0 / batch.size)


def kl_standard_normal(post: GaussianPosterior) -> Tensor:
    """KL(N(mu, sigma^2) || N(0, I)) summed over every latent dimension (and batch row)."""
    mu, log_sigma = post.mu, post.log_sigma
    if not (np.all(np.isfinite(mu.data)) and np.all(np.isfinite(log_sigma.data))):
        raise NumericError("non-finite posterior parameters")
    var = (log_sigma * 2.0).exp()
    return ((mu.square() + var - 1.0 - log_sigma * 2.0) * 0.5).sum()


@dataclass
class VAELossParts:
    loss: Tensor
    reconstruction: float
    kl: float


def vae_loss(batch: Batch, model: TextureFieldModel, eps, beta: float = 1.0,
             return_parts: bool = False):
    """``(1/B) * sum_b [beta * KL_b + sum_i |t(p_bi, s_b, z_b) - c_bi|_1]``.

    ``z_b = mu_b + sigma_b * eps_b`` with ``eps`` of shape (B, z_dim).
    """
    batch.validate()
    if model.mode != "vae":
        raise ContractError("vae_loss needs a model in vae mode")
    if batch.images is None:
        raise ContractError("VAE batch carries no target images")
    if beta < 0:
        raise ContractError(f"beta must be non-negative, got {beta}")
    s = _shape_embeddings(batch, model)
    post = model.encode_posterior(batch.images, s)
    z = reparameterize(post, eps)
    kl = kl_standard_normal(post)
    recon = reconstruction_sum(batch, model, s, z)
    loss = (kl * float(beta) + recon) * (1.0 / batch.size)
    if return_parts:
        return VAELossParts(loss, recon.item() / batch.size, kl.item() / batch.size)
    return loss
