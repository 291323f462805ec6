"""Command-line entry point: ``texfield <subcommand> [flags]``.

Every subcommand accepts ``--config FILE`` (a JSON object of option values,
for example a ``run_config.txt`` written by an earlier run); explicit flags
override values from the file. Each run writes the fully resolved options
to ``<out>/run_config.txt``, so ``texfield <cmd> --config <out>/run_config.txt``
repeats it.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from texfield.autodiff import no_grad
from texfield.errors import ContractError, TexFieldError
from texfield.evaluation import (
    build_color_voxel_grid,
    colorize_mesh,
    evaluate_images,
    render_field,
    render_voxel_grid,
    shape_embedding,
    voxel_mesh,
)
from texfield.geometry import Mesh, load_mesh, normalize_mesh, save_camera, save_ply
from texfield.geometry.primitives import PRIMITIVES, paint_octants, paint_two_tone, primitive
from texfield.nets import ModelConfig, TextureFieldModel
from texfield.raster import (
    generate_collection,
    generate_dataset,
    load_dataset,
    load_png,
    sample_views,
    save_png,
)
from texfield.train import TrainConfig, interpolate_latent, sample_prior, train

SNAPSHOT = "run_config.txt"
SEED_PAINT = 4
PAINTS = ("none", "octants", "two-tone")


@dataclass
class Opt:
    name: str
    type: type = str
    default: object = None
    help: str = ""
    nargs: str | None = None
    choices: tuple | None = None
    required: bool = False


def _view_opts(views=4, res=128, seed=0):
    return [
        Opt("views", int, views, "number of random upper-hemisphere cameras"),
        Opt("res", int, res, "image resolution (square)"),
        Opt("seed", int, seed, "seed for camera sampling"),
        Opt("radius_min", float, 1.2, "minimum camera distance"),
        Opt("radius_max", float, 2.0, "maximum camera distance"),
        Opt("fov", float, 50.0, "vertical field of view in degrees"),
    ]


def _latent_opts():
    return [
        Opt("cond_image", str, None, "PNG condition image (conditional / vae models)"),
        Opt("prior_seed", int, None, "sample z from the prior with this seed (vae models)"),
    ]


def _train_opts(mode):
    blocks = ModelConfig(mode=mode).n_blocks
    opts = [
        Opt("data", str, None, "dataset directory or manifest", required=True),
        Opt("iters", int, 1000, "training iterations"),
        Opt("lr", float, 1e-4, "Adam learning rate"),
        Opt("batch_size", int, 8, "views per batch"),
        Opt("pixel_cap", int, 1024, "foreground pixels sampled per view"),
        Opt("seed", int, 0, "master seed; all sub-seeds derive from it"),
        Opt("checkpoint_every", int, 0, "checkpoint interval in iterations (0 = final only)"),
        Opt("blocks", int, blocks, "ResNet blocks in the field"),
        Opt("hidden", int, 128, "field hidden width"),
        Opt("z_dim", int, 128 if mode != "overfit" else 16, "latent code size"),
        Opt("s_dim", int, 512 if mode != "overfit" else 16, "shape embedding size"),
        Opt("log_every", int, 100, "print progress every N iterations (0 = quiet)"),
    ]
    if mode != "overfit":
        opts += [
            Opt("pointnet_hidden", int, 128, "shape encoder hidden width"),
            Opt("points", int, 2048, "surface points per shape"),
            Opt("encoder_res", int, 64, "image encoder input resolution"),
            Opt("encoder_hidden", int, 512, "image encoder hidden width"),
        ]
    if mode == "vae":
        opts.append(Opt("beta", float, 1.0, "KL weight"))
    return opts


COMMANDS: dict[str, tuple[str, list[Opt]]] = {
    "gen-data": ("render a supervision dataset from meshes", [
        Opt("mesh", str, [], "input mesh files (.obj / .ply)", nargs="+"),
        Opt("primitive", str, [], f"built-in shapes: {', '.join(sorted(PRIMITIVES))}", nargs="+"),
        Opt("paint", str, "none", "recolor inputs procedurally", choices=PAINTS),
        *_view_opts(views=10),
    ]),
    "train-overfit": ("fit a field to a single shape (no encoders)", _train_opts("overfit")),
    "train-cond": ("train the image-conditional model", _train_opts("conditional")),
    "train-vae": ("train the conditional VAE", _train_opts("vae")),
    "render": ("render novel views of a mesh with a trained field", [
        Opt("model", str, None, "trained model (.texf)", required=True),
        Opt("mesh", str, None, "mesh to texture", required=True),
        *_latent_opts(), *_view_opts(),
    ]),
    "eval": ("score renders against a dataset's views", [
        Opt("data", str, None, "target dataset directory or manifest", required=True),
        Opt("model", str, None, "trained model to render with"),
        Opt("pred", str, None, "directory of predicted view_XXX.png images"),
        Opt("cond_view", int, 0, "condition view index (excluded from scoring)"),
        Opt("save_renders", bool, False, "also write the rendered predictions"),
    ]),
    "voxel-baseline": ("render and score a colored voxelization of a dataset's mesh", [
        Opt("data", str, None, "dataset directory or manifest", required=True),
        Opt("grid", int, 32, "voxels per axis"),
        Opt("seed", int, 0, "seed for surface sampling"),
    ]),
    "colorize": ("write a mesh with field-predicted vertex colors", [
        Opt("model", str, None, "trained model (.texf)", required=True),
        Opt("mesh", str, None, "mesh to color", required=True),
        *_latent_opts(),
    ]),
    "latent-interp": ("render a linear path between two latent codes", [
        Opt("model", str, None, "trained vae model (.texf)", required=True),
        Opt("data", str, None, "collection to encode endpoints from", required=True),
        Opt("objects", str, [], "two object names; endpoints are their encoded views", nargs="+"),
        Opt("cond_view", int, 0, "view index encoded for each endpoint"),
        Opt("steps", int, 5, "number of interpolation steps (inclusive)"),
        Opt("target", str, None, "object whose shape is rendered (default: the first endpoint)"),
        Opt("camera_seed", int, 0, "seed for the render camera"),
        Opt("res", int, 128, "render resolution"),
    ]),
    "latent-transfer": ("encode one object's view and render it on other shapes", [
        Opt("model", str, None, "trained model (.texf)", required=True),
        Opt("source", str, None, "dataset of the source object", required=True),
        Opt("source_view", int, 0, "index of the source view"),
        Opt("mesh", str, [], "target meshes", nargs="+", required=True),
        *_view_opts(views=1),
    ]),
}


class UsageError(Exception):
    pass


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="texfield", description="Texture fields on synthetic renderings.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    for cmd, (help_text, opts) in COMMANDS.items():
        p = sub.add_parser(cmd, help=help_text, description=help_text,
                           argument_default=argparse.SUPPRESS)
        p.add_argument("--config", help="JSON file of option values (flags override it)")
        p.add_argument("--out", help="output directory (required)")
        for o in opts:
            if o.type is bool:
                p.add_argument(_flag(o.name), dest=o.name, action="store_true", help=o.help)
                continue
            kw = {"type": o.type, "help": o.help + (f" (default: {o.default})" if o.default not in (None, []) else "")}
            if o.nargs:
                kw["nargs"] = o.nargs
            if o.choices:
                kw["choices"] = o.choices
            p.add_argument(_flag(o.name), dest=o.name, **kw)
    return parser


def resolve(command: str, explicit: dict) -> dict:
    """Merge defaults, the optional config file and explicit flags."""
    _, opts = COMMANDS[command]
    cfg = {o.name: o.default for o in opts}
    cfg["out"] = None
    path = explicit.pop("config", None)
    if path is not None:
        try:
            loaded = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise UsageError(f"config {path} must hold a JSON object")
        saved_cmd = loaded.pop("command", command)
        if saved_cmd != command:
            raise UsageError(f"config {path} is for {saved_cmd!r}, not {command!r}")
        unknown = set(loaded) - set(cfg)
        if unknown:
            raise UsageError(f"config {path} has unknown keys: {', '.join(sorted(unknown))}")
        cfg.update(loaded)
    cfg.update(explicit)
    if cfg["out"] is None:
        raise UsageError("--out is required")
    for o in opts:
        if o.required and cfg[o.name] in (None, []):
            raise UsageError(f"{_flag(o.name)} is required")
    return cfg


def write_snapshot(command: str, cfg: dict, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    snap = {"command": command, **cfg}
    (out / SNAPSHOT).write_text(json.dumps(snap, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _say(msg: str) -> None:
    print(msg, flush=True)


# -- helpers -----------------------------------------------------------------


def _cameras(cfg: dict):
    return sample_views(cfg["views"], (cfg["radius_min"], cfg["radius_max"]), cfg["seed"],
                        cfg["res"], cfg["fov"])


def _load_mesh(path) -> Mesh:
    return normalize_mesh(load_mesh(path))


def _load_model(path) -> TextureFieldModel:
    return TextureFieldModel.load(path)


def latent_from_image(model: TextureFieldModel, image: np.ndarray, mesh: Mesh | None = None) -> np.ndarray:
    """Appearance code for a condition image: encoder output or posterior mean."""
    if model.mode == "overfit":
        return np.zeros(model.config.z_dim, dtype=model.dtype)
    small = model.prepare_images(np.asarray(image)[None])
    with no_grad():
        if model.mode == "conditional":
            return model.encode_image(small).data[0]
        if mesh is None:
            raise ContractError("projecting an image into a vae latent needs the object's mesh")
        s = shape_embedding(model, mesh)
        return model.encode_posterior(small, s[None]).mu.data[0]


def _latent(model: TextureFieldModel, cfg: dict, mesh: Mesh) -> np.ndarray:
    if cfg.get("prior_seed") is not None:
        if model.mode != "vae":
            raise ContractError(f"--prior-seed needs a vae model, got {model.mode!r}")
        return sample_prior(model.config.z_dim, cfg["prior_seed"])
    if cfg.get("cond_image") is not None:
        return latent_from_image(model, load_png(cfg["cond_image"]), mesh)
    if model.mode == "conditional":
        raise ContractError("a conditional model needs --cond-image")
    return np.zeros(model.config.z_dim, dtype=model.dtype)


def _unique_names(paths) -> list[str]:
    names, seen = [], {}
    for p in paths:
        stem = Path(p).stem
        seen[stem] = seen.get(stem, 0) + 1
        names.append(stem if seen[stem] == 1 else f"{stem}_{seen[stem]}")
    return names


# -- subcommands -------------------------------------------------------------


def cmd_gen_data(cfg: dict, out: Path) -> None:
    sources = [(n, _load_mesh(p)) for n, p in zip(_unique_names(cfg["mesh"]), cfg["mesh"])]
    for name in cfg["primitive"]:
        sources.append((name, primitive(name)))
    if not sources:
        raise UsageError("give at least one --mesh or --primitive")
    rng = np.random.default_rng(cfg["seed"] + SEED_PAINT)
    meshes = {}
    for name, mesh in sources:
        if cfg["paint"] == "octants":
            mesh = paint_octants(mesh)
        elif cfg["paint"] == "two-tone":
            mesh, _ = paint_two_tone(mesh, rng)
        if name in meshes:
            raise UsageError(f"duplicate object name {name!r}")
        meshes[name] = mesh
    kw = dict(radius_range=(cfg["radius_min"], cfg["radius_max"]), fov_deg=cfg["fov"])
    if len(meshes) == 1:
        (name, mesh), = meshes.items()
        generate_dataset(mesh, cfg["views"], cfg["res"], cfg["seed"], out, name=name, **kw)
    else:
        generate_collection(meshes, cfg["views"], cfg["res"], cfg["seed"], out, **kw)
    _say(f"wrote {len(meshes)} object(s) x {cfg['views']} views to {out}")


def _cmd_train(mode: str):
    def run(cfg: dict, out: Path) -> None:
        mc = {"mode": mode, "n_blocks": cfg["blocks"], "hidden": cfg["hidden"], "s_dim": cfg["s_dim"],
              "z_dim": cfg["z_dim"], "init_seed": cfg["seed"]}
        if mode != "overfit":
            mc.update(pointnet_hidden=cfg["pointnet_hidden"], n_points=cfg["points"],
                      encoder_res=cfg["encoder_res"], encoder_hidden=cfg["encoder_hidden"])
        tc = TrainConfig(lr=cfg["lr"], batch_size=cfg["batch_size"], pixel_cap=cfg["pixel_cap"],
                         iterations=cfg["iters"], seed=cfg["seed"], beta=cfg.get("beta", 1.0),
                         checkpoint_every=cfg["checkpoint_every"])
        every = cfg["log_every"]

        def progress(step, rec):
            if every and (step % every == 0 or step == tc.iterations - 1):
                print(f"step {step:6d}  loss {rec['loss']:.4f}  kl {rec['kl']:.4f}", file=sys.stderr, flush=True)

        result = train(cfg["data"], tc, mode, model_config=ModelConfig(**mc), out_dir=out, progress=progress)
        final = result.log[-1]["loss"] if result.log else float("nan")
        _say(f"trained {tc.iterations} iterations ({result.model.num_parameters()} parameters); "
             f"final loss {final:.6g}; model written to {out / 'model.texf'}")
    return run


def cmd_render(cfg: dict, out: Path) -> None:
    model = _load_model(cfg["model"])
    mesh = _load_mesh(cfg["mesh"])
    z = _latent(model, cfg, mesh)
    s = shape_embedding(model, mesh)
    for i, cam in enumerate(_cameras(cfg)):
        save_png(render_field(model, mesh, cam, z=z, s=s), out / f"view_{i:03d}.png")
        save_camera(cam, out / f"view_{i:03d}.cam")
    _say(f"rendered {cfg['views']} views to {out}")


def cmd_eval(cfg: dict, out: Path) -> None:
    if (cfg["model"] is None) == (cfg["pred"] is None):
        raise UsageError("give exactly one of --model or --pred")
    objects = load_dataset(cfg["data"])
    preds, targets, masks, per_object = [], [], [], []
    model = _load_model(cfg["model"]) if cfg["model"] else None
    for obj in objects:
        idx = list(range(len(obj.views)))
        if model is None:
            pred_dir = Path(cfg["pred"]) / (obj.name if len(objects) > 1 else "")
            obj_preds = [load_png(pred_dir / f"view_{i:03d}.png") for i in idx]
        else:
            if model.mode != "overfit":
                if not 0 <= cfg["cond_view"] < len(obj.views):
                    raise UsageError(f"--cond-view {cfg['cond_view']} out of range for {obj.name}")
                idx.remove(cfg["cond_view"])
            z = latent_from_image(model, obj.views[cfg["cond_view"]].image, obj.mesh)
            s = shape_embedding(model, obj.mesh)
            obj_preds = [render_field(model, obj.mesh, obj.views[i].camera, z=z, s=s) for i in idx]
            if cfg["save_renders"]:
                sub = out / "renders" / (obj.name if len(objects) > 1 else "")
                sub.mkdir(parents=True, exist_ok=True)
                for i, img in zip(idx, obj_preds):
                    save_png(img, sub / f"view_{i:03d}.png")
        preds += obj_preds
        targets += [obj.views[i].image for i in idx]
        masks += [obj.views[i].mask for i in idx]
        per_object += [(obj.name, i) for i in idx]
    report = evaluate_images(preds, targets, masks, model_id=str(cfg["model"] or cfg["pred"]),
                             config=model.config.to_dict() if model else {})
    for rec, (name, i) in zip(report.per_view, per_object):
        rec.update(object=name, view=i)
    report.save(out / "metrics.json")
    _say(f"ssim_mean {report.ssim_mean:.6f}  psnr_mean {report.psnr_mean:.4f}  "
         f"l1_mean {report.l1_mean:.6f}  l1_fg_mean {report.l1_fg_mean:.6f}  views {report.view_count}")


def cmd_voxel_baseline(cfg: dict, out: Path) -> None:
    objects = load_dataset(cfg["data"])
    preds, targets, masks, labels = [], [], [], []
    for obj in objects:
        grid = build_color_voxel_grid(obj.mesh, cfg["grid"], seed=cfg["seed"])
        sub = out / (obj.name if len(objects) > 1 else "")
        sub.mkdir(parents=True, exist_ok=True)
        save_ply(voxel_mesh(grid), sub / "voxels.ply")
        for i, v in enumerate(obj.views):
            img = render_voxel_grid(grid, v.camera)
            save_png(img, sub / f"view_{i:03d}.png")
            preds.append(img)
            targets.append(v.image)
            masks.append(v.mask)
            labels.append((obj.name, i))
    report = evaluate_images(preds, targets, masks, model_id=f"voxels-{cfg['grid']}",
                             config={"grid": cfg["grid"], "memory_bytes": cfg["grid"] ** 3 * 12})
    for rec, (name, i) in zip(report.per_view, labels):
        rec.update(object=name, view=i)
    report.save(out / "metrics.json")
    _say(f"ssim_mean {report.ssim_mean:.6f}  l1_fg_mean {report.l1_fg_mean:.6f}  views {report.view_count}")


def cmd_colorize(cfg: dict, out: Path) -> None:
    model = _load_model(cfg["model"])
    mesh = _load_mesh(cfg["mesh"])
    colored = colorize_mesh(model, mesh, z=_latent(model, cfg, mesh))
    save_ply(colored, out / "colorized.ply")
    _say(f"wrote {out / 'colorized.ply'} ({colored.n_vertices} vertices)")


def cmd_latent_interp(cfg: dict, out: Path) -> None:
    model = _load_model(cfg["model"])
    if model.mode != "vae":
        raise ContractError(f"latent-interp needs a vae model, got {model.mode!r}")
    objects = {o.name: o for o in load_dataset(cfg["data"])}
    if len(cfg["objects"]) != 2:
        raise UsageError("--objects takes exactly two names")
    ends = []
    for name in cfg["objects"]:
        if name not in objects:
            raise UsageError(f"unknown object {name!r}; have {', '.join(sorted(objects))}")
        obj = objects[name]
        ends.append(latent_from_image(model, obj.views[cfg["cond_view"]].image, obj.mesh))
    target = objects[cfg["target"] or cfg["objects"][0]]
    cam = sample_views(1, seed=cfg["camera_seed"], resolution=cfg["res"])[0]
    s = shape_embedding(model, target.mesh)
    for i, z in enumerate(interpolate_latent(ends[0], ends[1], cfg["steps"])):
        save_png(render_field(model, target.mesh, cam, z=z, s=s), out / f"interp_{i:02d}.png")
    _say(f"rendered {cfg['steps']} interpolation steps to {out}")


def cmd_latent_transfer(cfg: dict, out: Path) -> None:
    model = _load_model(cfg["model"])
    source = load_dataset(cfg["source"])
    if len(source) != 1:
        raise UsageError("--source must be a single-object dataset")
    src = source[0]
    if not 0 <= cfg["source_view"] < len(src.views):
        raise UsageError(f"--source-view {cfg['source_view']} out of range")
    z = latent_from_image(model, src.views[cfg["source_view"]].image, src.mesh)
    cams = _cameras(cfg)
    for name, path in zip(_unique_names(cfg["mesh"]), cfg["mesh"]):
        mesh = _load_mesh(path)
        s = shape_embedding(model, mesh)
        for i, cam in enumerate(cams):
            save_png(render_field(model, mesh, cam, z=z, s=s), out / f"{name}_{i:03d}.png")
    _say(f"transferred appearance of {src.name} to {len(cfg['mesh'])} mesh(es) in {out}")


HANDLERS = {
    "gen-data": cmd_gen_data,
    "train-overfit": _cmd_train("overfit"),
    "train-cond": _cmd_train("conditional"),
    "train-vae": _cmd_train("vae"),
    "render": cmd_render,
    "eval": cmd_eval,
    "voxel-baseline": cmd_voxel_baseline,
    "colorize": cmd_colorize,
    "latent-interp": cmd_latent_interp,
    "latent-transfer": cmd_latent_transfer,
}


def _thread_limit():
    value = os.environ.get("TEXF_THREADS")
    if not value:
        return None
    try:
        n = int(value)
    except ValueError:
        raise UsageError(f"TEXF_THREADS must be an integer, got {value!r}") from None
    if n < 1:
        raise UsageError(f"TEXF_THREADS must be >= 1, got {n}")
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=n)


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    explicit = vars(ns)
    command = explicit.pop("command")
    try:
        cfg = resolve(command, explicit)
        out = Path(cfg["out"])
        limiter = _thread_limit()
        try:
            write_snapshot(command, cfg, out)
            HANDLERS[command](cfg, out)
        finally:
            if limiter is not None:
                limiter.restore_original_limits()
    except UsageError as exc:
        print(f"texfield {command}: error: {exc}", file=sys.stderr)
        return 2
    except (TexFieldError, OSError, ValueError, KeyError) as exc:
        print(f"texfield {command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
