"""Conditional, VAE and single-object training."""

from texfield.train.latent import interpolate_latent, sample_prior
from texfield.train.losses import (
    Batch,
    VAELossParts,
    conditional_loss,
    kl_standard_normal,
    reconstruction_sum,
    vae_loss,
)
from texfield.train.loop import (
    BatchSampler,
    TrainConfig,
    TrainResult,
    sample_pixels,
    train,
    write_loss_log,
)

__all__ = [
    "Batch", "BatchSampler", "TrainConfig", "TrainResult", "VAELossParts", "conditional_loss",
    "interpolate_latent", "kl_standard_normal", "reconstruction_sum", "sample_pixels",
    "sample_prior", "train", "vae_loss", "write_loss_log",
]
