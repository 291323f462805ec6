"""Texture field network and its shape, image and VAE encoders."""

from texfield.nets.encoders import (
    GaussianPosterior,
    ImageEncoder,
    ShapeEncoder,
    VAEEncoder,
    reparameterize,
)
from texfield.nets.field import TextureField
from texfield.nets.layers import ResnetBlockFC, area_downsample
from texfield.nets.model import (
    MODES,
    ModelConfig,
    TextureFieldModel,
    image_encode,
    shape_encode,
    texture_field_forward,
    vae_encode,
)

__all__ = [
    "GaussianPosterior", "ImageEncoder", "MODES", "ModelConfig", "ResnetBlockFC", "ShapeEncoder",
    "TextureField", "TextureFieldModel", "VAEEncoder", "area_downsample", "image_encode",
    "reparameterize", "shape_encode", "texture_field_forward", "vae_encode",
]
