"""Colored voxel-grid baseline over the normalized unit cube."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from texfield.errors import ContractError
from texfield.geometry import Camera, Mesh, sample_surface
from texfield.raster import BACKGROUND, rasterize

BOUNDS = (-0.5, 0.5)
SAMPLES_PER_VOXEL = 20


@dataclass
class ColorVoxelGrid:
    """``resolution``³ cells over ``BOUNDS``; ``colors`` is zero where unoccupied."""

    resolution: int
    occupancy: np.ndarray
    colors: np.ndarray
    bounds: tuple = BOUNDS

    @property
    def n_occupied(self) -> int:
        return int(self.occupancy.sum())

    def memory_bytes(self) -> int:
        """Bytes of a dense float32 RGB grid at this resolution."""
        return self.resolution**3 * 3 * 4

    def voxel_index(self, points: np.ndarray) -> np.ndarray:
        lo, hi = self.bounds
        ijk = np.floor((np.asarray(points) - lo) * (self.resolution / (hi - lo))).astype(np.int64)
        return np.clip(ijk, 0, self.resolution - 1)


def default_sample_count(mesh: Mesh, resolution: int, per_voxel: int = SAMPLES_PER_VOXEL) -> int:
    """Samples so that a surface voxel receives ``per_voxel`` hits on average.

    A surface of area A crosses at most about ``2 A R²`` cells of side 1/R.
    """
    area = float(mesh.face_areas().sum())
    return max(1, int(np.ceil(per_voxel * 2.0 * area * resolution**2)))


def build_color_voxel_grid(mesh: Mesh, resolution: int, n_samples: int | None = None,
                           seed: int = 0) -> ColorVoxelGrid:
    """Occupy every cell that contains a surface sample; color it with the samples' mean."""
    if resolution < 1:
        raise ContractError(f"resolution must be >= 1, got {resolution}")
    if n_samples is None:
        n_samples = default_sample_count(mesh, resolution)
    cloud = sample_surface(mesh, n_samples, seed=seed)
    grid = ColorVoxelGrid(resolution, np.zeros((resolution,) * 3, dtype=bool),
                          np.zeros((resolution,) * 3 + (3,)))
    ijk = grid.voxel_index(cloud.points)
    flat = np.ravel_multi_index(ijk.T, (resolution,) * 3)
    counts = np.bincount(flat, minlength=resolution**3)
    sums = np.stack([np.bincount(flat, weights=cloud.colors[:, c], minlength=resolution**3)
                     for c in range(3)], axis=1)
    occ = counts > 0
    cols = np.zeros_like(sums)
    cols[occ] = sums[occ] / counts[occ, None]
    grid.occupancy = occ.reshape((resolution,) * 3)
    grid.colors = np.clip(cols, 0.0, 1.0).reshape((resolution,) * 3 + (3,))
    return grid


# unit-cube corners of the face facing each axis direction, counter-clockwise seen from outside
_FACES = {
    (-1, 0, 0): [(0, 0, 0), (0, 0, 1), (0, 1, 1), (0, 1, 0)],
    (1, 0, 0): [(1, 0, 0), (1, 1, 0), (1, 1, 1), (1, 0, 1)],
    (0, -1, 0): [(0, 0, 0), (1, 0, 0), (1, 0, 1), (0, 0, 1)],
    (0, 1, 0): [(0, 1, 0), (0, 1, 1), (1, 1, 1), (1, 1, 0)],
    (0, 0, -1): [(0, 0, 0), (0, 1, 0), (1, 1, 0), (1, 0, 0)],
    (0, 0, 1): [(0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)],
}


def voxel_mesh(grid: ColorVoxelGrid) -> Mesh:
    """Flat-colored mesh of the exposed faces of all occupied cells."""
    R = grid.resolution
    occ = grid.occupancy
    padded = np.pad(occ, 1)
    lo, hi = grid.bounds
    size = (hi - lo) / R
    verts, faces, cols = [], [], []
    offset = 0
    for d, corners in _FACES.items():
        sl = tuple(slice(1 + k, 1 + k + R) for k in d)
        exposed = occ & ~padded[sl]
        cells = np.argwhere(exposed)
        if not len(cells):
            continue
        corner = np.asarray(corners, dtype=np.float64)
        v = (cells[:, None, :] + corner[None]) * size + lo          # (n, 4, 3)
        n = len(cells)
        base = offset + 4 * np.arange(n)[:, None]
        f = np.concatenate([base + [0, 1, 2], base + [0, 2, 3]], axis=1).reshape(-1, 3)
        verts.append(v.reshape(-1, 3))
        faces.append(f)
        cols.append(np.repeat(grid.colors[tuple(cells.T)], 4, axis=0))
        offset += 4 * n
    if not verts:
        return Mesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))
    return Mesh(np.concatenate(verts), np.concatenate(faces), np.concatenate(cols))


def render_voxel_grid(grid: ColorVoxelGrid, camera: Camera, background=BACKGROUND) -> np.ndarray:
    """Rasterize occupied cells as flat-colored cubes."""
    return rasterize(voxel_mesh(grid), camera, background).image
