"""Batch assembly and the conditional / VAE / overfit training loops."""

from __future__ import annotations

import csv
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from texfield.autodiff import Adam, optimizer_path, save_adam_state
from texfield.errors import ContractError, NumericError
from texfield.geometry import sample_surface
from texfield.nets import ModelConfig, TextureFieldModel
from texfield.raster import ObjectViews, ViewSample, load_dataset
from texfield.train.losses import Batch, conditional_loss, vae_loss

# sub-seed offsets derived from TrainConfig.seed
SEED_BATCH = 1
SEED_NOISE = 2
SEED_CLOUD = 3


@dataclass
class TrainConfig:
    lr: float = 1e-4
    batch_size: int = 8
    pixel_cap: int = 1024
    iterations: int = 1000
    seed: int = 0
    beta: float = 1.0
    checkpoint_every: int = 0

    def __post_init__(self):
        if not self.lr > 0:
            raise ContractError(f"lr must be positive, got {self.lr}")
        if self.beta < 0:
            raise ContractError(f"beta must be non-negative, got {self.beta}")
        if self.batch_size < 1 or self.pixel_cap < 1 or self.iterations < 0:
            raise ContractError("batch_size and pixel_cap must be >= 1, iterations >= 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


def sample_pixels(view: ViewSample, cap: int, rng: np.random.Generator):
    """Up to ``cap`` foreground pixels drawn without replacement.

    Returns pixel-center coordinates, depths, colors and the weight
    ``N / k`` that makes the subsampled sum unbiased for the full-view sum.
    """
    ys, xs = np.nonzero(view.mask)
    n = len(ys)
    if n == 0:
        raise ContractError("view has no foreground pixels")
    if n > cap:
        pick = np.sort(rng.choice(n, size=cap, replace=False))
        ys, xs = ys[pick], xs[pick]
    u = np.stack([xs + 0.5, ys + 0.5], axis=1).astype(np.float64)
    return u, view.depth[ys, xs].astype(np.float64), view.image[ys, xs], n / len(ys)


class BatchSampler:
    """Draws training batches from loaded objects.

    Conditional mode pairs a condition view with a different supervision
    view of the same object; VAE and overfit modes supervise on one view
    (which is also the VAE encoder input).
    """

    def __init__(self, objects: list[ObjectViews], mode: str, model: TextureFieldModel,
                 config: TrainConfig):
        if not objects:
            raise ContractError("dataset has no objects")
        if mode == "overfit" and len(objects) != 1:
            raise ContractError(f"overfit mode trains on exactly one object, got {len(objects)}")
        if mode == "conditional" and any(len(o.views) < 2 for o in objects):
            raise ContractError("conditional mode needs at least two views per object")
        self.objects = objects
        self.mode = mode
        self.config = config
        self.model = model
        self.rng = np.random.default_rng(config.seed + SEED_BATCH)
        n_points = model.config.n_points
        self.clouds = np.stack([
            sample_surface(o.mesh, n_points, seed=config.seed + SEED_CLOUD + 7919 * i).points
            for i, o in enumerate(objects)
        ])
        self._small: dict[tuple[int, int], np.ndarray] = {}

    def encoder_image(self, obj: int, view: int) -> np.ndarray:
        key = (obj, view)
        if key not in self._small:
            self._small[key] = self.model.prepare_images(self.objects[obj].views[view].image)
        return self._small[key]

    def sample(self) -> Batch:
        rng = self.rng
        B = self.config.batch_size
        pts, cols, wts, idx, objs, imgs = [], [], [], [], [], []
        for b in range(B):
            o = int(rng.integers(len(self.objects)))
            views = self.objects[o].views
            if self.mode == "conditional":
                cond = int(rng.integers(len(views)))
                sup = int(rng.integers(len(views) - 1))
                sup += sup >= cond
                imgs.append(self.encoder_image(o, cond))
            else:
                sup = int(rng.integers(len(views)))
                if self.mode == "vae":
                    imgs.append(self.encoder_image(o, sup))
            view = views[sup]
            u, d, c, w = sample_pixels(view, self.config.pixel_cap, rng)
            pts.append(view.camera.unproject(u, d))
            cols.append(c)
            wts.append(np.full(len(u), w))
            idx.append(np.full(len(u), b))
            objs.append(o)
        uniq, inverse = np.unique(np.array(objs), return_inverse=True)
        return Batch(
            points=np.concatenate(pts), targets=np.concatenate(cols), weights=np.concatenate(wts),
            index=np.concatenate(idx), clouds=self.clouds[uniq], cloud_index=inverse,
            images=np.stack(imgs) if imgs else None,
        )


@dataclass
class TrainResult:
    model: TextureFieldModel
    log: list[dict] = field(default_factory=list)
    optimizer: Adam | None = None


LOG_FIELDS = ("step", "loss", "reconstruction", "kl")


def write_loss_log(log: list[dict], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LOG_FIELDS)
        for rec in log:
            w.writerow([rec["step"]] + [repr(float(rec[k])) for k in LOG_FIELDS[1:]])


def _as_objects(dataset) -> list[ObjectViews]:
    if isinstance(dataset, (str, Path)):
        return load_dataset(dataset)
    return list(dataset)


def train(dataset, config: TrainConfig, mode: str, model: TextureFieldModel | None = None,
          model_config: ModelConfig | None = None, out_dir=None, progress=None) -> TrainResult:
    """Optimise a texture-field model on rendered views with Adam.

    Each step samples a batch, unprojects the sampled pixels, evaluates the
    loss for ``mode``, backpropagates and applies one Adam update. With
    ``out_dir`` the loss log (``loss_log.csv``), per-step wall times
    (``timing.csv``), periodic checkpoints and the final ``model.texf``
    are written there.

    Raises:
        ContractError: model and requested mode disagree, or dataset unusable.
        NumericError: the loss became non-finite (reports the iteration).
    """
    if model is None:
        model = TextureFieldModel(model_config or ModelConfig(mode=mode))
    if model.mode != mode:
        raise ContractError(f"model is in {model.mode!r} mode but training was requested in {mode!r}")
    objects = _as_objects(dataset)
    sampler = BatchSampler(objects, mode, model, config)
    noise = np.random.default_rng(config.seed + SEED_NOISE)
    params = list(model.named_parameters().items())
    opt = Adam([p for _, p in params], lr=config.lr)
    for name, p in params:
        p.name = name
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    log: list[dict] = []
    timing: list[tuple[int, float]] = []
    t0 = time.monotonic()
    for step in range(config.iterations):
        batch = sampler.sample()
        opt.zero_grad()
        if mode == "vae":
            eps = noise.standard_normal((batch.size, model.config.z_dim)).astype(model.dtype)
            parts = vae_loss(batch, model, eps, config.beta, return_parts=True)
            loss, recon, kl = parts.loss, parts.reconstruction, parts.kl
        else:
            loss = conditional_loss(batch, model)
            recon, kl = loss.item(), 0.0
        value = loss.item()
        if not np.isfinite(value):
            raise NumericError(f"non-finite loss at iteration {step}")
        loss.backward()
        opt.step()
        log.append({"step": step, "loss": value, "reconstruction": recon, "kl": kl})
        timing.append((step, time.monotonic() - t0))
        if progress is not None:
            progress(step, log[-1])
        if out is not None and config.checkpoint_every and (step + 1) % config.checkpoint_every == 0:
            _checkpoint(model, opt, [n for n, _ in params], out / "checkpoints" / f"step_{step + 1:06d}.texf")
    if out is not None:
        _checkpoint(model, opt, [n for n, _ in params], out / "model.texf")
        write_loss_log(log, out / "loss_log.csv")
        with open(out / "timing.csv", "w", encoding="utf-8") as fh:
            fh.write("step,wall_time\n")
            fh.writelines(f"{s},{t:.6f}\n" for s, t in timing)
    return TrainResult(model, log, opt)


def _checkpoint(model, opt, names, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    model.save(path)
    save_adam_state(optimizer_path(path), opt.state, names)
