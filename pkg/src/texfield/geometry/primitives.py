"""Procedural meshes and colorings used to build synthetic datasets."""

from __future__ import annotations

import numpy as np

from texfield.geometry.mesh import Mesh, normalize_mesh


def _grid_quad(origin, du, dv, n):
    """Vertices/faces of an n x n subdivided parallelogram (outward by du x dv)."""
    s = np.linspace(0.0, 1.0, n + 1)
    uu, vv = np.meshgrid(s, s, indexing="ij")
    verts = origin + uu.reshape(-1, 1) * du + vv.reshape(-1, 1) * dv
    faces = []
    for i in range(n):
        for j in range(n):
            a = i * (n + 1) + j
            b, c, d = a + (n + 1), a + (n + 1) + 1, a + 1
            faces += [[a, b, c], [a, c, d]]
    return verts, np.array(faces)


def box(extents=(1.0, 1.0, 1.0), subdiv: int = 1) -> Mesh:
    """Axis-aligned box centered at the origin; each face is an ``subdiv``² grid."""
    ex, ey, ez = (0.5 * np.asarray(extents, dtype=np.float64))
    X, Y, Z = np.array([2 * ex, 0, 0]), np.array([0, 2 * ey, 0]), np.array([0, 0, 2 * ez])
    lo = np.array([-ex, -ey, -ez])
    quads = [
        (lo, Y, X),                # z = -ez
        (lo + Z, X, Y),            # z = +ez
        (lo, X, Z),                # y = -ey
        (lo + Y, Z, X),            # y = +ey
        (lo, Z, Y),                # x = -ex
        (lo + X, Y, Z),            # x = +ex
    ]
    verts, faces = [], []
    off = 0
    for o, du, dv in quads:
        v, f = _grid_quad(o, du, dv, subdiv)
        verts.append(v)
        faces.append(f + off)
        off += len(v)
    return Mesh(np.concatenate(verts), np.concatenate(faces))


def uv_sphere(n_lat: int = 16, n_lon: int = 32, radius: float = 0.5) -> Mesh:
    verts = [[0.0, 0.0, radius]]
    for i in range(1, n_lat):
        th = np.pi * i / n_lat
        for j in range(n_lon):
            ph = 2 * np.pi * j / n_lon
            verts.append([radius * np.sin(th) * np.cos(ph), radius * np.sin(th) * np.sin(ph), radius * np.cos(th)])
    verts.append([0.0, 0.0, -radius])
    bottom = len(verts) - 1
    faces = []

    def ring(i, j):
        return 1 + (i - 1) * n_lon + (j % n_lon)

    for j in range(n_lon):
        faces.append([0, ring(1, j), ring(1, j + 1)])
        faces.append([bottom, ring(n_lat - 1, j + 1), ring(n_lat - 1, j)])
    for i in range(1, n_lat - 1):
        for j in range(n_lon):
            a, b = ring(i, j), ring(i, j + 1)
            c, d = ring(i + 1, j), ring(i + 1, j + 1)
            faces += [[a, c, d], [a, d, b]]
    return Mesh(np.array(verts), np.array(faces))


def _revolve(profile, n_seg: int, cap_bottom=None, cap_top=None) -> Mesh:
    """Surface of revolution about z of a polyline of (r, z) pairs."""
    profile = np.asarray(profile, dtype=np.float64)
    n_p = len(profile)
    verts, faces = [], []
    for r, z in profile:
        for j in range(n_seg):
            ph = 2 * np.pi * j / n_seg
            verts.append([r * np.cos(ph), r * np.sin(ph), z])
    for i in range(n_p - 1):
        for j in range(n_seg):
            a = i * n_seg + j
            b = i * n_seg + (j + 1) % n_seg
            c, d = a + n_seg, b + n_seg
            faces += [[a, b, d], [a, d, c]]
    for cap, ring_i, flip in ((cap_bottom, 0, True), (cap_top, n_p - 1, False)):
        if cap is None:
            continue
        centre = len(verts)
        verts.append([0.0, 0.0, cap])
        for j in range(n_seg):
            a = ring_i * n_seg + j
            b = ring_i * n_seg + (j + 1) % n_seg
            faces.append([centre, b, a] if flip else [centre, a, b])
    return Mesh(np.array(verts), np.array(faces))


def cylinder(radius: float = 0.5, height: float = 1.0, n_seg: int = 32, n_rings: int = 8) -> Mesh:
    zs = np.linspace(-height / 2, height / 2, n_rings + 1)
    return _revolve([(radius, z) for z in zs], n_seg, -height / 2, height / 2)


def cone(radius: float = 0.5, height: float = 1.0, n_seg: int = 32, n_rings: int = 8) -> Mesh:
    ts = np.linspace(0.0, 1.0, n_rings + 1)[:-1]
    prof = [(radius * (1 - t), -height / 2 + t * height) for t in ts]
    return _revolve(prof, n_seg, -height / 2, height / 2)


def torus(major: float = 0.35, minor: float = 0.15, n_major: int = 32, n_minor: int = 16) -> Mesh:
    verts, faces = [], []
    for i in range(n_major):
        u = 2 * np.pi * i / n_major
        for j in range(n_minor):
            v = 2 * np.pi * j / n_minor
            r = major + minor * np.cos(v)
            verts.append([r * np.cos(u), r * np.sin(u), minor * np.sin(v)])
    for i in range(n_major):
        for j in range(n_minor):
            a = i * n_minor + j
            b = ((i + 1) % n_major) * n_minor + j
            c = ((i + 1) % n_major) * n_minor + (j + 1) % n_minor
            d = i * n_minor + (j + 1) % n_minor
            faces += [[a, b, c], [a, c, d]]
    return Mesh(np.array(verts), np.array(faces))


def subdivide(mesh: Mesh, levels: int = 1) -> Mesh:
    """Midpoint (1-to-4) subdivision; colors are averaged onto new vertices."""
    verts, cols, faces = mesh.vertices, mesh.vertex_colors, mesh.faces
    for _ in range(levels):
        edge_mid: dict[tuple[int, int], int] = {}
        v_list, c_list = list(verts), list(cols)
        new_faces = []

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in edge_mid:
                edge_mid[key] = len(v_list)
                v_list.append(0.5 * (verts[a] + verts[b]))
                c_list.append(0.5 * (cols[a] + cols[b]))
            return edge_mid[key]

        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_faces += [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]
        verts, cols, faces = np.array(v_list), np.array(c_list), np.array(new_faces)
    return Mesh(verts, faces, cols)


def octahedron(subdiv: int = 3) -> Mesh:
    v = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=np.float64) * 0.5
    f = np.array([[0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4], [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5]])
    return subdivide(Mesh(v, f), subdiv)


def tetrahedron(subdiv: int = 3) -> Mesh:
    v = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=np.float64) * 0.5
    f = np.array([[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]])
    return subdivide(Mesh(v, f), subdiv)


PRIMITIVES = {
    "cube": lambda: box((1, 1, 1), 6),
    "slab": lambda: box((1.0, 0.6, 0.3), 6),
    "sphere": uv_sphere,
    "cylinder": cylinder,
    "cone": cone,
    "torus": torus,
    "octahedron": octahedron,
    "tetrahedron": tetrahedron,
}


def primitive(name: str) -> Mesh:
    """A named primitive, normalized to the unit bounding box."""
    try:
        build = PRIMITIVES[name]
    except KeyError:
        raise ValueError(f"unknown primitive {name!r}; choose from {sorted(PRIMITIVES)}") from None
    return normalize_mesh(build())


# -- colorings ---------------------------------------------------------------


def unshare_vertices(mesh: Mesh) -> Mesh:
    """Give every face its own three vertices so faces can be flat-colored."""
    idx = mesh.faces.reshape(-1)
    return Mesh(mesh.vertices[idx], np.arange(len(idx)).reshape(-1, 3), mesh.vertex_colors[idx])


def paint_faces(mesh: Mesh, face_colors) -> Mesh:
    """Flat-color each face; returns a mesh with unshared vertices."""
    flat = unshare_vertices(mesh)
    flat.vertex_colors = np.repeat(np.asarray(face_colors, dtype=np.float64), 3, axis=0)
    flat.validate()
    return flat


REGION_PALETTE = np.array([
    [0.90, 0.10, 0.10],
    [0.10, 0.70, 0.20],
    [0.15, 0.25, 0.90],
    [0.95, 0.85, 0.10],
    [0.80, 0.20, 0.80],
    [0.10, 0.80, 0.85],
    [0.95, 0.55, 0.10],
    [0.20, 0.20, 0.20],
])


def paint_octants(mesh: Mesh, palette=REGION_PALETTE) -> Mesh:
    """Eight color regions: one palette entry per octant of the face centroid."""
    c = mesh.triangles().mean(axis=1)
    region = (c[:, 0] >= 0).astype(int) + 2 * (c[:, 1] >= 0) + 4 * (c[:, 2] >= 0)
    return paint_faces(mesh, np.asarray(palette)[region])


def paint_two_tone(mesh: Mesh, rng: np.random.Generator, min_contrast: float = 0.5):
    """Split the surface by a random plane into two random colors.

    Returns ``(mesh, (color_a, color_b, normal, offset))``.
    """
    normal = rng.normal(size=3)
    normal /= np.linalg.norm(normal)
    offset = rng.uniform(-0.1, 0.1)
    while True:
        ca, cb = rng.uniform(0.05, 0.95, size=(2, 3))
        if np.abs(ca - cb).sum() >= min_contrast:
            break
    c = mesh.triangles().mean(axis=1)
    side = (c @ normal) >= offset
    return paint_faces(mesh, np.where(side[:, None], ca, cb)), (ca, cb, normal, offset)
