"""Vertex-colored triangle meshes: validation, OBJ/PLY I/O, normalization."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from texfield.errors import ContractError, DomainError, ParseError

DEFAULT_COLOR = (0.5, 0.5, 0.5)


@dataclass
class Mesh:
    """Indexed triangle set with one RGB color in [0, 1] per vertex."""

    vertices: np.ndarray
    faces: np.ndarray
    vertex_colors: np.ndarray | None = None

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if self.vertex_colors is None:
            self.vertex_colors = np.tile(np.array(DEFAULT_COLOR), (len(self.vertices), 1))
        self.vertex_colors = np.asarray(self.vertex_colors, dtype=np.float64).reshape(-1, 3)
        self.validate()

    def validate(self) -> None:
        nv = len(self.vertices)
        if len(self.vertex_colors) != nv:
            raise ContractError(
                f"{len(self.vertex_colors)} vertex colors for {nv} vertices"
            )
        if self.faces.size and (self.faces.min() < 0 or self.faces.max() >= nv):
            raise ContractError(f"face index out of range for {nv} vertices")
        c = self.vertex_colors
        if c.size and (c.min() < 0.0 or c.max() > 1.0):
            raise ContractError("vertex colors must lie in [0, 1]")

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def triangles(self) -> np.ndarray:
        """(F, 3, 3) array of face corner positions."""
        return self.vertices[self.faces]

    def face_areas(self) -> np.ndarray:
        tri = self.triangles()
        return 0.5 * np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def copy(self) -> "Mesh":
        return Mesh(self.vertices.copy(), self.faces.copy(), self.vertex_colors.copy())

    def with_colors(self, colors) -> "Mesh":
        return Mesh(self.vertices.copy(), self.faces.copy(), np.asarray(colors, dtype=np.float64))


def normalize_mesh(mesh: Mesh) -> Mesh:
    """Center the bounding box at the origin and scale its longest side to 1."""
    if mesh.n_vertices == 0:
        raise DomainError("cannot normalize an empty mesh")
    lo, hi = mesh.bounds()
    extent = float((hi - lo).max())
    if extent <= 0.0:
        raise DomainError("degenerate mesh: zero extent along every axis")
    center = 0.5 * (lo + hi)
    return Mesh((mesh.vertices - center) / extent, mesh.faces.copy(), mesh.vertex_colors.copy())


def merge_meshes(meshes) -> Mesh:
    verts, faces, cols = [], [], []
    offset = 0
    for m in meshes:
        verts.append(m.vertices)
        faces.append(m.faces + offset)
        cols.append(m.vertex_colors)
        offset += m.n_vertices
    if not verts:
        return Mesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))
    return Mesh(np.concatenate(verts), np.concatenate(faces), np.concatenate(cols))


# -- readers -----------------------------------------------------------------


def load_mesh(path) -> Mesh:
    """Read an OBJ (``v x y z [r g b]``) or ASCII PLY mesh with vertex colors."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8", errors="strict")
    except (OSError, UnicodeDecodeError) as exc:
        raise ParseError(f"cannot read mesh: {exc}", path=path) from exc
    suffix = path.suffix.lower()
    if suffix == ".obj":
        return _parse_obj(text, path)
    if suffix == ".ply":
        return _parse_ply(text, path)
    raise ParseError(f"unsupported mesh format {suffix!r}", path=path)


def _parse_obj(text: str, path) -> Mesh:
    verts, colors, faces = [], [], []
    any_color = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if tok[0] == "v":
            try:
                vals = [float(x) for x in tok[1:]]
            except ValueError:
                raise ParseError(f"malformed vertex line {raw!r}", path=path, line=lineno) from None
            if len(vals) == 3:
                verts.append(vals)
                colors.append(None)
            elif len(vals) >= 6:
                verts.append(vals[:3])
                colors.append(vals[3:6])
                any_color = True
            else:
                raise ParseError(f"vertex needs 3 or 6 values, got {len(vals)}", path=path, line=lineno)
        elif tok[0] == "f":
            try:
                idx = [int(t.split("/")[0]) for t in tok[1:]]
            except ValueError:
                raise ParseError(f"malformed face line {raw!r}", path=path, line=lineno) from None
            if len(idx) < 3:
                raise ParseError("face needs at least 3 vertices", path=path, line=lineno)
            nv = len(verts)
            idx = [i - 1 if i > 0 else nv + i for i in idx]
            for i in idx:
                if not 0 <= i < nv:
                    raise ParseError(f"face index {i + 1} out of range ({nv} vertices)", path=path, line=lineno)
            for k in range(1, len(idx) - 1):
                faces.append([idx[0], idx[k], idx[k + 1]])
    cols = np.array([c if c is not None else DEFAULT_COLOR for c in colors], dtype=np.float64).reshape(-1, 3)
    if any_color and cols.size and cols.max() > 1.0:
        cols = cols / 255.0
    return _checked(verts, faces, cols, path)


def _checked(verts, faces, cols, path) -> Mesh:
    try:
        return Mesh(np.array(verts, dtype=np.float64).reshape(-1, 3),
                    np.array(faces, dtype=np.int64).reshape(-1, 3), cols)
    except ContractError as exc:
        raise ParseError(str(exc), path=path) from exc


def _parse_ply(text: str, path) -> Mesh:
    lines = text.splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ParseError("missing 'ply' header", path=path, line=1)
    elements: list[tuple[str, int, list[tuple[str, str]]]] = []
    i = 1
    while True:
        if i >= len(lines):
            raise ParseError("header has no end_header", path=path, line=i)
        tok = lines[i].split()
        i += 1
        if not tok or tok[0] in ("comment", "obj_info"):
            continue
        if tok[0] == "format":
            if tok[1] != "ascii":
                raise ParseError(f"only ascii PLY is supported, got {tok[1]}", path=path, line=i)
        elif tok[0] == "element":
            elements.append((tok[1], int(tok[2]), []))
        elif tok[0] == "property":
            if not elements:
                raise ParseError("property before element", path=path, line=i)
            if tok[1] == "list":
                elements[-1][2].append((tok[4], "list"))
            else:
                elements[-1][2].append((tok[2], tok[1]))
        elif tok[0] == "end_header":
            break
    verts, cols, faces = [], [], []
    for name, count, props in elements:
        names = [p[0] for p in props]
        for _ in range(count):
            if i >= len(lines):
                raise ParseError(f"unexpected end of file in element {name}", path=path, line=i)
            tok = lines[i].split()
            lineno = i + 1
            i += 1
            try:
                if name == "vertex":
                    row = dict(zip(names, (float(t) for t in tok)))
                    verts.append([row["x"], row["y"], row["z"]])
                    if "red" in row:
                        scale = 255.0 if dict(props)["red"] in ("uchar", "uint8", "char", "int") else 1.0
                        cols.append([row["red"] / scale, row["green"] / scale, row["blue"] / scale])
                    else:
                        cols.append(list(DEFAULT_COLOR))
                elif name == "face":
                    n = int(tok[0])
                    idx = [int(t) for t in tok[1:1 + n]]
                    if len(idx) != n or n < 3:
                        raise ParseError("malformed face record", path=path, line=lineno)
                    for j in idx:
                        if not 0 <= j < len(verts):
                            raise ParseError(f"face index {j} out of range ({len(verts)} vertices)",
                                             path=path, line=lineno)
                    for k in range(1, n - 1):
                        faces.append([idx[0], idx[k], idx[k + 1]])
            except ParseError:
                raise
            except (ValueError, KeyError, IndexError):
                raise ParseError(f"malformed {name} record {lines[i - 1]!r}", path=path, line=lineno) from None
    return _checked(verts, faces, np.array(cols, dtype=np.float64).reshape(-1, 3), path)


# -- writers -----------------------------------------------------------------


def save_ply(mesh: Mesh, path) -> None:
    """Write an ASCII PLY with 8-bit per-vertex colors."""
    rgb = np.clip(np.round(mesh.vertex_colors * 255.0), 0, 255).astype(np.int64)
    out = [
        "ply",
        "format ascii 1.0",
        f"element vertex {mesh.n_vertices}",
        "property float x", "property float y", "property float z",
        "property uchar red", "property uchar green", "property uchar blue",
        f"element face {mesh.n_faces}",
        "property list uchar int vertex_indices",
        "end_header",
    ]
    for v, c in zip(mesh.vertices, rgb):
        out.append(f"{v[0]:.9g} {v[1]:.9g} {v[2]:.9g} {c[0]} {c[1]} {c[2]}")
    for f in mesh.faces:
        out.append(f"3 {f[0]} {f[1]} {f[2]}")
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


def save_obj(mesh: Mesh, path) -> None:
    """Write an OBJ using the ``v x y z r g b`` vertex-color extension."""
    out = []
    for v, c in zip(mesh.vertices, mesh.vertex_colors):
        out.append(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g} {c[0]:.6g} {c[1]:.6g} {c[2]:.6g}")
    for f in mesh.faces:
        out.append(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}")
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")
