"""Meshes, cameras, surface sampling and pixel unprojection."""

from texfield.geometry.camera import (
    Camera,
    intrinsics,
    load_camera,
    look_at,
    make_camera,
    save_camera,
)
from texfield.geometry.mesh import (
    DEFAULT_COLOR,
    Mesh,
    load_mesh,
    merge_meshes,
    normalize_mesh,
    save_obj,
    save_ply,
)
from texfield.geometry.sampling import DEFAULT_POINTS, PointCloud, sample_surface


def unproject(u, d, camera: Camera):
    """World point for pixel ``u`` at depth ``d``: ``d * R @ inv(K) @ u + t``."""
    return camera.unproject(u, d)


def project(p, camera: Camera):
    """Pixel coordinate and camera-frame depth of world point ``p``."""
    return camera.project(p)


__all__ = [
    "Camera", "DEFAULT_COLOR", "DEFAULT_POINTS", "Mesh", "PointCloud", "intrinsics",
    "load_camera", "load_mesh", "look_at", "make_camera", "merge_meshes", "normalize_mesh",
    "project", "sample_surface", "save_camera", "save_obj", "save_ply", "unproject",
]
