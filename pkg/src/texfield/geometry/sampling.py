"""Area-weighted uniform sampling of mesh surfaces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from texfield.errors import ContractError, DomainError
from texfield.geometry.mesh import Mesh

DEFAULT_POINTS = 2048


@dataclass
class PointCloud:
    """Surface samples with interpolated colors and the face each came from."""

    points: np.ndarray
    colors: np.ndarray
    face_index: np.ndarray
    source: str = ""

    def __len__(self) -> int:
        return len(self.points)


def sample_surface(mesh: Mesh, n: int = DEFAULT_POINTS, seed: int = 0, source: str = "") -> PointCloud:
    """Draw ``n`` points uniformly by area over the surface of ``mesh``.

    Faces are picked with probability proportional to their area; inside a
    face the point is drawn uniformly via the square-root barycentric map and
    its color is the barycentric blend of the corner colors.
    """
    if n < 1:
        raise ContractError(f"sample count must be >= 1, got {n}")
    areas = mesh.face_areas() if mesh.n_faces else np.zeros(0)
    total = float(areas.sum())
    if not total > 0.0:
        raise DomainError("mesh has no face with positive area")
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(areas)
    pick = rng.random(n) * cdf[-1]
    face = np.minimum(np.searchsorted(cdf, pick, side="right"), len(areas) - 1)
    r1 = np.sqrt(rng.random(n))
    r2 = rng.random(n)
    bary = np.stack([1.0 - r1, r1 * (1.0 - r2), r1 * r2], axis=1)
    corners = mesh.faces[face]
    points = np.einsum("nk,nkd->nd", bary, mesh.vertices[corners])
    colors = np.einsum("nk,nkd->nd", bary, mesh.vertex_colors[corners])
    return PointCloud(points, np.clip(colors, 0.0, 1.0), face, source)
