"""Random upper-hemisphere views and on-disk supervision datasets.

A dataset directory holds ``mesh.ply`` (the normalized mesh), one PNG image,
one ``TEXD`` depth file and one camera record per view, and
``manifest.json``. A collection directory holds one such dataset per object
plus a top-level ``manifest.json`` listing them.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from texfield.errors import ContractError, ParseError
from texfield.geometry.camera import Camera, load_camera, make_camera, save_camera
from texfield.geometry.mesh import Mesh, load_mesh, normalize_mesh, save_ply
from texfield.raster.rasterizer import BACKGROUND, ViewSample, rasterize

DEPTH_MAGIC = b"TEXD"
TRAIN_RESOLUTION = 128
EVAL_RESOLUTION = 256
RADIUS_RANGE = (1.2, 2.0)
FOV_DEG = 50.0


def sample_views(n: int, radius_range=RADIUS_RANGE, seed: int = 0, resolution: int = TRAIN_RESOLUTION,
                 fov_deg: float = FOV_DEG) -> list[Camera]:
    """Cameras on the upper hemisphere (z >= 0) looking at the origin.

    Directions are uniform by solid angle (uniform height on the unit
    hemisphere, uniform azimuth); the radius is uniform in ``radius_range``.
    The up hint is world +z.
    """
    if n < 1:
        raise ContractError(f"need at least one view, got {n}")
    r_lo, r_hi = map(float, radius_range)
    if not 0 < r_lo <= r_hi:
        raise ContractError(f"radius range must be positive and ordered, got {radius_range}")
    rng = np.random.default_rng(seed)
    h = rng.uniform(0.0, 1.0, n)
    phi = rng.uniform(0.0, 2 * np.pi, n)
    radius = rng.uniform(r_lo, r_hi, n)
    s = np.sqrt(1.0 - h * h)
    dirs = np.stack([s * np.cos(phi), s * np.sin(phi), h], axis=1)
    return [make_camera(r * d, resolution, resolution, fov_deg) for r, d in zip(radius, dirs)]


def quantize_image(image: np.ndarray) -> np.ndarray:
    """Round to 8-bit levels, matching what a PNG round trip returns."""
    return _to_uint8(image).astype(np.float32) / np.float32(255.0)


def _to_uint8(image: np.ndarray) -> np.ndarray:
    return np.clip(np.round(np.asarray(image, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def save_png(image: np.ndarray, path) -> None:
    Image.fromarray(_to_uint8(image)).save(path, format="PNG")


def load_png(path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
    except OSError as exc:
        raise ParseError(f"cannot read image: {exc}", path=path) from exc
    return arr.astype(np.float32) / np.float32(255.0)


def save_depth(depth: np.ndarray, path) -> None:
    depth = np.asarray(depth, dtype="<f4")
    h, w = depth.shape
    Path(path).write_bytes(DEPTH_MAGIC + struct.pack("<II", w, h) + depth.tobytes())


def load_depth(path) -> np.ndarray:
    path = Path(path)
    try:
        buf = path.read_bytes()
    except OSError as exc:
        raise ParseError(f"cannot read depth: {exc.strerror}", path=path) from exc
    if buf[:4] != DEPTH_MAGIC or len(buf) < 12:
        raise ParseError("not a TEXD depth file", path=path)
    w, h = struct.unpack_from("<II", buf, 4)
    if len(buf) != 12 + 4 * w * h:
        raise ParseError(f"depth payload size mismatch for {w}x{h}", path=path)
    return np.frombuffer(buf, dtype="<f4", offset=12).reshape(h, w).astype(np.float32)


def _sha256(*paths) -> str:
    h = hashlib.sha256()
    for p in paths:
        h.update(Path(p).read_bytes())
    return h.hexdigest()


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def render_views(mesh: Mesh, cameras, background=BACKGROUND) -> list[ViewSample]:
    """Rasterize each camera, with images quantized to the 8-bit levels stored on disk."""
    out = []
    for cam in cameras:
        view = rasterize(mesh, cam, background)
        view.image = quantize_image(view.image)
        out.append(view)
    return out


def generate_dataset(mesh: Mesh, n_views: int, resolution: int = TRAIN_RESOLUTION, seed: int = 0,
                     out_dir=".", radius_range=RADIUS_RANGE, fov_deg: float = FOV_DEG,
                     background=BACKGROUND, name: str = "object") -> dict:
    """Render ``n_views`` random views of ``mesh`` into ``out_dir``; return the manifest."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"{out}: {exc.strerror}") from exc
    mesh = normalize_mesh(mesh)
    save_ply(mesh, out / "mesh.ply")
    cameras = sample_views(n_views, radius_range, seed, resolution, fov_deg)
    entries = []
    for i, (cam, view) in enumerate(zip(cameras, render_views(mesh, cameras, background))):
        stem = f"view_{i:03d}"
        paths = {"image": f"{stem}.png", "depth": f"{stem}.depth", "camera": f"{stem}.cam"}
        save_png(view.image, out / paths["image"])
        save_depth(view.depth, out / paths["depth"])
        save_camera(cam, out / paths["camera"])
        entries.append({
            "index": i, **paths, "seed": int(seed), "resolution": int(resolution),
            "sha256": _sha256(*(out / p for p in paths.values())),
        })
    manifest = {
        "format": "texfield-views", "version": 1, "name": name, "mesh": "mesh.ply",
        "seed": int(seed), "resolution": int(resolution), "radius_range": [float(r) for r in radius_range],
        "fov_deg": float(fov_deg), "background": [float(b) for b in background], "views": entries,
    }
    write_json(manifest, out / "manifest.json")
    return manifest


def generate_collection(meshes: dict, n_views: int, resolution: int = TRAIN_RESOLUTION, seed: int = 0,
                        out_dir=".", **kwargs) -> dict:
    """One dataset per named mesh under ``out_dir/<name>/``; per-object seeds are ``seed + 1000 * i``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    objects = []
    for i, (name, mesh) in enumerate(meshes.items()):
        generate_dataset(mesh, n_views, resolution, seed + 1000 * i, out / name, name=name, **kwargs)
        objects.append({"name": name, "manifest": f"{name}/manifest.json"})
    manifest = {"format": "texfield-collection", "version": 1, "seed": int(seed), "objects": objects}
    write_json(manifest, out / "manifest.json")
    return manifest


@dataclass
class ObjectViews:
    """All rendered views of one object, loaded from disk."""

    name: str
    mesh: Mesh
    views: list[ViewSample]
    root: Path
    manifest: dict = field(default_factory=dict)


def load_view(root, entry: dict) -> ViewSample:
    root = Path(root)
    image = load_png(root / entry["image"])
    depth = load_depth(root / entry["depth"])
    cam = load_camera(root / entry["camera"])
    if image.shape[:2] != depth.shape or depth.shape != (cam.height, cam.width):
        raise ParseError("image, depth and camera resolutions disagree", path=root / entry["image"])
    return ViewSample(image, depth, depth > 0, cam)


def load_dataset(manifest_path) -> list[ObjectViews]:
    """Load a single-object dataset or a collection as a list of objects."""
    path = Path(manifest_path)
    if path.is_dir():
        path = path / "manifest.json"
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read manifest: {exc}", path=path) from exc
    kind = manifest.get("format")
    if kind == "texfield-collection":
        out = []
        for obj in manifest["objects"]:
            out.extend(load_dataset(path.parent / obj["manifest"]))
        return out
    if kind != "texfield-views":
        raise ParseError(f"unknown manifest format {kind!r}", path=path)
    root = path.parent
    views = [load_view(root, e) for e in manifest["views"]]
    return [ObjectViews(manifest.get("name", root.name), load_mesh(root / manifest["mesh"]), views, root, manifest)]
