"""Pinhole camera, look-at construction and pixel/depth (un)projection.

Conventions: camera frame is x right, y down, z forward. ``R`` rotates
camera-frame directions into the world and ``t`` is the camera center, so a
pixel ``u`` (homogeneous, pixel centers at half-integers) at depth ``d``
maps to ``p = d * R @ inv(K) @ u + t``. Depth is the camera-frame z.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from texfield.errors import ContractError, DomainError, ParseError


@dataclass
class Camera:
    K: np.ndarray
    R: np.ndarray
    t: np.ndarray
    width: int
    height: int

    def __post_init__(self):
        self.K = np.asarray(self.K, dtype=np.float64).reshape(3, 3)
        self.R = np.asarray(self.R, dtype=np.float64).reshape(3, 3)
        self.t = np.asarray(self.t, dtype=np.float64).reshape(3)
        self.width = int(self.width)
        self.height = int(self.height)
        if np.abs(self.R @ self.R.T - np.eye(3)).max() > 1e-6 or abs(np.linalg.det(self.R) - 1.0) > 1e-6:
            raise ContractError("R must be a rotation (orthonormal, det +1)")
        K = self.K
        if abs(K[1, 0]) > 0 or abs(K[2, 0]) > 0 or abs(K[2, 1]) > 0 or K[0, 0] <= 0 or K[1, 1] <= 0:
            raise ContractError("K must be upper-triangular with positive focal lengths")
        if self.width < 0 or self.height < 0:
            raise ContractError("resolution must be non-negative")

    @property
    def resolution(self) -> tuple[int, int]:
        return self.width, self.height

    @property
    def center(self) -> np.ndarray:
        return self.t

    @property
    def optical_axis(self) -> np.ndarray:
        """World-space viewing direction (camera +z)."""
        return self.R[:, 2]

    def to_camera(self, points) -> np.ndarray:
        """World points (..., 3) to camera-frame coordinates."""
        return (np.asarray(points, dtype=np.float64) - self.t) @ self.R

    def unproject(self, u, d) -> np.ndarray:
        """Lift pixel coordinates ``u`` (..., 2) at depths ``d`` (...) to world points."""
        u = np.asarray(u, dtype=np.float64)
        d = np.asarray(d, dtype=np.float64)
        if not np.all(np.isfinite(d)) or np.any(d <= 0):
            raise DomainError("unproject needs finite, positive depth")
        if np.any(u[..., 0] < 0) or np.any(u[..., 0] > self.width) or \
                np.any(u[..., 1] < 0) or np.any(u[..., 1] > self.height):
            raise DomainError("pixel coordinate outside the image")
        uh = np.concatenate([u, np.ones(u.shape[:-1] + (1,))], axis=-1)
        rays = np.linalg.solve(self.K, uh.reshape(-1, 3).T).T.reshape(uh.shape)
        return d[..., None] * (rays @ self.R.T) + self.t

    def project(self, p) -> tuple[np.ndarray, np.ndarray]:
        """Project world points (..., 3) to pixel coordinates and camera-frame depth."""
        pc = self.to_camera(p)
        depth = pc[..., 2]
        if np.any(depth <= 0):
            raise DomainError("point at or behind the camera plane")
        q = pc @ self.K.T
        return q[..., :2] / q[..., 2:3], depth

    def pixel_centers(self) -> np.ndarray:
        """(H, W, 2) array of pixel-center coordinates (x + 0.5, y + 0.5)."""
        ys, xs = np.mgrid[0:self.height, 0:self.width]
        return np.stack([xs + 0.5, ys + 0.5], axis=-1).astype(np.float64)


def intrinsics(width: int, height: int, fov_deg: float = 50.0) -> np.ndarray:
    """K for a centered principal point and the given horizontal field of view."""
    f = 0.5 * width / np.tan(0.5 * np.deg2rad(fov_deg))
    return np.array([[f, 0.0, 0.5 * width], [0.0, f, 0.5 * height], [0.0, 0.0, 1.0]])


def look_at(eye, target=(0.0, 0.0, 0.0), up=(0.0, 0.0, 1.0)) -> np.ndarray:
    """Camera-to-world rotation whose +z axis points from ``eye`` to ``target``."""
    eye = np.asarray(eye, dtype=np.float64)
    fwd = np.asarray(target, dtype=np.float64) - eye
    n = np.linalg.norm(fwd)
    if n == 0:
        raise DomainError("eye coincides with target")
    fwd /= n
    up = np.asarray(up, dtype=np.float64)
    right = np.cross(fwd, up)
    if np.linalg.norm(right) < 1e-8:
        # looking straight along the up hint: fall back to world +y
        right = np.cross(fwd, np.array([0.0, 1.0, 0.0]))
    right /= np.linalg.norm(right)
    down = np.cross(fwd, right)
    return np.stack([right, down, fwd], axis=1)


def make_camera(eye, width: int, height: int, fov_deg: float = 50.0, target=(0.0, 0.0, 0.0),
                up=(0.0, 0.0, 1.0)) -> Camera:
    return Camera(intrinsics(width, height, fov_deg), look_at(eye, target, up), eye, width, height)


# -- camera records ----------------------------------------------------------


def save_camera(camera: Camera, path) -> None:
    """Write ``K``, ``R``, ``t``, ``width``, ``height`` as one record per line."""

    def row(a):
        return " ".join(repr(float(x)) for x in np.asarray(a).reshape(-1))

    text = (
        f"K {row(camera.K)}\nR {row(camera.R)}\nt {row(camera.t)}\n"
        f"width {camera.width}\nheight {camera.height}\n"
    )
    Path(path).write_text(text, encoding="utf-8")


def load_camera(path) -> Camera:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ParseError(f"cannot read camera: {exc.strerror}", path=path) from exc
    fields: dict[str, list[str]] = {}
    for lineno, line in enumerate(lines, start=1):
        tok = line.split()
        if not tok:
            continue
        if tok[0] in fields:
            raise ParseError(f"duplicate field {tok[0]}", path=path, line=lineno)
        fields[tok[0]] = tok[1:]
    expect = {"K": 9, "R": 9, "t": 3, "width": 1, "height": 1}
    for key, n in expect.items():
        if len(fields.get(key, ())) != n:
            raise ParseError(f"field {key} needs {n} values", path=path)
    try:
        return Camera(
            np.array([float(x) for x in fields["K"]]).reshape(3, 3),
            np.array([float(x) for x in fields["R"]]).reshape(3, 3),
            np.array([float(x) for x in fields["t"]]),
            int(fields["width"][0]),
            int(fields["height"][0]),
        )
    except (ValueError, ContractError) as exc:
        raise ParseError(str(exc), path=path) from exc
