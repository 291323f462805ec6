"""Novel-view rendering and mesh colorization with a trained field."""

from __future__ import annotations

import numpy as np

from texfield.autodiff import no_grad
from texfield.errors import ContractError
from texfield.geometry import Camera, Mesh, PointCloud, sample_surface
from texfield.nets import TextureFieldModel
from texfield.raster import BACKGROUND, rasterize

CHUNK = 16384
CLOUD_SEED = 0


def shape_embedding(model: TextureFieldModel, mesh: Mesh | None = None, cloud: PointCloud | None = None,
                    seed: int = CLOUD_SEED) -> np.ndarray:
    """Embedding of ``mesh`` (via a fresh surface sample) or of a given cloud."""
    if model.shape_encoder is None:
        return np.zeros(model.config.s_dim, dtype=model.dtype)
    if cloud is None:
        if mesh is None:
            raise ContractError("need a mesh or a point cloud for the shape embedding")
        cloud = sample_surface(mesh, model.config.n_points, seed=seed)
    with no_grad():
        return model.encode_shape(cloud.points).data


def query_field(model: TextureFieldModel, points: np.ndarray, s, z) -> np.ndarray:
    """Evaluate the field on (N, 3) points in chunks, without recording a graph."""
    s = np.asarray(getattr(s, "data", s), dtype=model.dtype)
    z = np.asarray(getattr(z, "data", z), dtype=model.dtype)
    out = np.empty((len(points), 3), dtype=np.float32)
    with no_grad():
        for i in range(0, len(points), CHUNK):
            out[i:i + CHUNK] = model.colors(points[i:i + CHUNK].astype(model.dtype), s, z).data
    return out


def render_field(model: TextureFieldModel, mesh: Mesh, camera: Camera, z=None, s=None,
                 background=BACKGROUND, cloud: PointCloud | None = None) -> np.ndarray:
    """Render ``mesh`` from ``camera`` with colors predicted by the field.

    Depth comes from rasterizing the geometry; every foreground pixel is
    unprojected and colored by the field, then composited over ``background``.
    """
    if z is None:
        z = np.zeros(model.config.z_dim, dtype=model.dtype)
    z = np.asarray(getattr(z, "data", z))
    if z.shape != (model.config.z_dim,):
        raise ContractError(f"latent code must have shape ({model.config.z_dim},), got {z.shape}")
    if s is None:
        s = shape_embedding(model, mesh, cloud)
    geo = rasterize(mesh, camera, background, with_color=False)
    image = np.empty((camera.height, camera.width, 3), dtype=np.float32)
    image[:] = np.asarray(background, dtype=np.float32)
    ys, xs = np.nonzero(geo.mask)
    if len(ys):
        u = np.stack([xs + 0.5, ys + 0.5], axis=1).astype(np.float64)
        p = camera.unproject(u, geo.depth[ys, xs].astype(np.float64))
        image[ys, xs] = query_field(model, p, s, z)
    return image


def colorize_mesh(model: TextureFieldModel, mesh: Mesh, z=None, s=None) -> Mesh:
    """Copy of ``mesh`` whose vertex colors are the field evaluated at each vertex."""
    if z is None:
        z = np.zeros(model.config.z_dim, dtype=model.dtype)
    if s is None:
        s = shape_embedding(model, mesh)
    colors = query_field(model, mesh.vertices, s, z).astype(np.float64)
    return Mesh(mesh.vertices.copy(), mesh.faces.copy(), colors)
