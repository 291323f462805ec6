"""Model configuration and the composite texture-field model."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from texfield.autodiff import Module, Tensor, load_tensors, save_tensors
from texfield.errors import ContractError, ParseError
from texfield.nets.encoders import GaussianPosterior, ImageEncoder, ShapeEncoder, VAEEncoder
from texfield.nets.field import TextureField
from texfield.nets.layers import area_downsample

MODES = ("conditional", "vae", "overfit")
_DEFAULT_BLOCKS = {"conditional": 6, "vae": 4, "overfit": 6}


@dataclass
class ModelConfig:
    """Architecture knobs.

    ``overfit`` mode fits one fixed shape: there are no encoders and both
    ``s`` and ``z`` are fixed zero vectors.
    """

    mode: str = "conditional"
    n_blocks: int | None = None
    hidden: int = 128
    s_dim: int = 512
    z_dim: int = 128
    encoder_res: int = 64
    encoder_hidden: int = 512
    pointnet_hidden: int = 128
    n_points: int = 2048
    init_seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ContractError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.n_blocks is None:
            self.n_blocks = _DEFAULT_BLOCKS[self.mode]
        for name in ("n_blocks", "hidden", "encoder_res", "encoder_hidden", "pointnet_hidden", "n_points"):
            if getattr(self, name) < 1:
                raise ContractError(f"{name} must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ContractError(f"unknown model config keys {sorted(unknown)}")
        return cls(**d)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "ModelConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as exc:
            raise ParseError(f"cannot read model config: {exc}", path=path) from exc


class TextureFieldModel(Module):
    """Texture field plus the encoders its mode needs.

    * ``conditional``: shape encoder + image encoder, ``z`` from a condition image.
    * ``vae``: shape encoder + VAE encoder, ``z`` sampled from the posterior/prior.
    * ``overfit``: field only.
    """

    def __init__(self, config: ModelConfig):
        self.config = config
        rng = np.random.default_rng(config.init_seed)
        c = config
        self.field = TextureField(c.n_blocks, c.hidden, c.s_dim, c.z_dim, rng)
        self.shape_encoder = None
        self.image_encoder = None
        self.vae_encoder = None
        if c.mode != "overfit":
            self.shape_encoder = ShapeEncoder(c.pointnet_hidden, c.s_dim, rng)
        if c.mode == "conditional":
            self.image_encoder = ImageEncoder(c.encoder_res, c.encoder_hidden, c.z_dim, rng)
        elif c.mode == "vae":
            self.vae_encoder = VAEEncoder(c.encoder_res, c.encoder_hidden, c.s_dim, c.z_dim, rng)

    @property
    def mode(self) -> str:
        return self.config.mode

    @property
    def dtype(self):
        return self.field.fc_p.weight.dtype

    def parameter_groups(self) -> dict[str, list[Tensor]]:
        groups = {"field": self.field.parameters()}
        for name in ("shape_encoder", "image_encoder", "vae_encoder"):
            mod = getattr(self, name)
            if mod is not None:
                groups[name] = mod.parameters()
        return groups

    def encode_shape(self, clouds) -> Tensor:
        """Shape embeddings for (B, N, 3) or (N, 3) clouds; zeros in overfit mode."""
        clouds = np.asarray(getattr(clouds, "data", clouds))
        if self.shape_encoder is None:
            lead = clouds.shape[:-2]
            return Tensor(np.zeros(lead + (self.config.s_dim,), dtype=self.dtype))
        return self.shape_encoder(clouds.astype(self.dtype))

    def prepare_images(self, images) -> np.ndarray:
        """Area-downsample rendered views to the encoder resolution."""
        return area_downsample(np.asarray(images, dtype=self.dtype), self.config.encoder_res)

    def encode_image(self, images) -> Tensor:
        if self.image_encoder is None:
            raise ContractError(f"model in {self.mode!r} mode has no image encoder")
        return self.image_encoder(images)

    def encode_posterior(self, images, s) -> GaussianPosterior:
        if self.vae_encoder is None:
            raise ContractError(f"model in {self.mode!r} mode has no VAE encoder")
        return self.vae_encoder(images, s)

    def zero_latent(self, batch: int | None = None) -> Tensor:
        shape = (self.config.z_dim,) if batch is None else (batch, self.config.z_dim)
        return Tensor(np.zeros(shape, dtype=self.dtype))

    def colors(self, points, s, z, index=None) -> Tensor:
        return self.field(points, s, z, index)

    # -- persistence ---------------------------------------------------------
    def save(self, path) -> None:
        """Write parameters to ``path`` and the config to ``<path>.json``."""
        path = Path(path)
        save_tensors(path, self.named_parameters())
        self.config.save(path.with_name(path.name + ".json"))

    @classmethod
    def load(cls, path) -> "TextureFieldModel":
        path = Path(path)
        model = cls(ModelConfig.load(path.with_name(path.name + ".json")))
        model.load_state_dict(load_tensors(path))
        return model


def texture_field_forward(points, s, z, model: TextureFieldModel) -> Tensor:
    return model.field(points, s, z)


def shape_encode(cloud, model: TextureFieldModel) -> Tensor:
    return model.encode_shape(getattr(cloud, "points", cloud))


def image_encode(image, model: TextureFieldModel) -> Tensor:
    return model.encode_image(image)


def vae_encode(image, s, model: TextureFieldModel) -> GaussianPosterior:
    return model.encode_posterior(image, s)
