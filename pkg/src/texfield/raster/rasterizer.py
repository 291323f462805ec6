"""Z-buffer triangle rasterizer producing color, depth and mask images."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from texfield.errors import ContractError
from texfield.geometry.camera import Camera
from texfield.geometry.mesh import Mesh

BACKGROUND = (1.0, 1.0, 1.0)
NEAR = 1e-3
_EDGE_EPS = -1e-9


@dataclass
class ViewSample:
    """One supervision record: image (H, W, 3), depth (H, W, 0 = background), mask, camera."""

    image: np.ndarray
    depth: np.ndarray
    mask: np.ndarray
    camera: Camera

    @property
    def n_foreground(self) -> int:
        return int(self.mask.sum())

    def foreground(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Pixel-center coordinates (N, 2), depths (N,) and colors (N, 3) of mask pixels."""
        ys, xs = np.nonzero(self.mask)
        u = np.stack([xs + 0.5, ys + 0.5], axis=1).astype(np.float64)
        return u, self.depth[ys, xs].astype(np.float64), self.image[ys, xs]


def rasterize(mesh: Mesh, camera: Camera, background=BACKGROUND, with_color: bool = True) -> ViewSample:
    """Render ``mesh`` from ``camera`` with one sample per pixel center.

    Colors and depth are interpolated perspective-correctly (barycentric
    weights divided by camera-frame z); the nearest surface wins. Lighting is
    not modelled: vertex colors are shown as-is. Triangles with a corner
    closer than ``NEAR`` to the camera plane are dropped.
    """
    W, H = camera.width, camera.height
    if W <= 0 or H <= 0:
        raise ContractError(f"camera resolution must be positive, got {W}x{H}")
    bg = np.asarray(background, dtype=np.float32)
    image = np.empty((H, W, 3), dtype=np.float32)
    image[:] = bg
    zbuf = np.full((H, W), np.inf)
    if mesh.n_faces:
        _draw(mesh, camera, image, zbuf, with_color)
    mask = np.isfinite(zbuf)
    depth = np.where(mask, zbuf, 0.0).astype(np.float32)
    return ViewSample(image, depth, mask, camera)


def _draw(mesh: Mesh, camera: Camera, image: np.ndarray, zbuf: np.ndarray, with_color: bool) -> None:
    W, H = camera.width, camera.height
    pc = camera.to_camera(mesh.vertices)
    z = pc[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        q = pc @ camera.K.T
        uv = q[:, :2] / q[:, 2:3]
    faces = mesh.faces
    keep = np.all(z[faces] > NEAR, axis=1)
    faces = faces[keep]
    tri_uv = uv[faces]                  # (F, 3, 2)
    tri_z = z[faces]                    # (F, 3)
    tri_c = mesh.vertex_colors[faces]   # (F, 3, 3)
    x0, y0 = tri_uv[:, 0, 0], tri_uv[:, 0, 1]
    x1, y1 = tri_uv[:, 1, 0], tri_uv[:, 1, 1]
    x2, y2 = tri_uv[:, 2, 0], tri_uv[:, 2, 1]
    area = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
    lo = np.ceil(tri_uv.min(axis=1) - 0.5)
    hi = np.floor(tri_uv.max(axis=1) - 0.5)
    lo = np.maximum(lo, 0).astype(np.int64)
    hi = np.minimum(hi, [W - 1, H - 1]).astype(np.int64)
    ok = (np.abs(area) > 1e-12) & np.all(hi >= lo, axis=1)
    inv_z = 1.0 / tri_z

    for f in np.nonzero(ok)[0]:
        xa, ya = lo[f]
        xb, yb = hi[f]
        px = np.arange(xa, xb + 1) + 0.5
        py = (np.arange(ya, yb + 1) + 0.5)[:, None]
        inv_a = 1.0 / area[f]
        w0 = ((x1[f] - px) * (y2[f] - py) - (x2[f] - px) * (y1[f] - py)) * inv_a
        w1 = ((x2[f] - px) * (y0[f] - py) - (x0[f] - px) * (y2[f] - py)) * inv_a
        w2 = 1.0 - w0 - w1
        inside = (w0 >= _EDGE_EPS) & (w1 >= _EDGE_EPS) & (w2 >= _EDGE_EPS)
        if not inside.any():
            continue
        iz = inv_z[f]
        a0, a1, a2 = w0 * iz[0], w1 * iz[1], w2 * iz[2]
        s = a0 + a1 + a2
        d = 1.0 / s
        zb = zbuf[ya:yb + 1, xa:xb + 1]
        win = inside & (d < zb)
        if not win.any():
            continue
        zb[win] = d[win]
        if with_color:
            c = tri_c[f]
            col = (a0[..., None] * c[0] + a1[..., None] * c[1] + a2[..., None] * c[2]) / s[..., None]
            image[ya:yb + 1, xa:xb + 1][win] = col[win]
