"""Triangle mesh container plus Wavefront OBJ read/write.

Only v/f records are honored; materials, normals and texture coordinates in
f-records are ignored. Faces with more than three vertices are fan
triangulated on load.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyGeometry, MeshParseError

logger = logging.getLogger(__name__)

DEGENERATE_AREA = 1e-12


@dataclass(frozen=True)
class TriMesh:
    """Immutable triangle mesh: float64 vertices (N,3), int32 faces (M,3)."""

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        f = np.asarray(self.faces, dtype=np.int32).reshape(-1, 3)
        v.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def triangles(self) -> np.ndarray:
        """(M, 3, 3) corner coordinates."""
        return self.vertices[self.faces]

    def face_areas(self) -> np.ndarray:
        tri = self.triangles()
        cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        return 0.5 * np.linalg.norm(cross, axis=1)

    def face_normals(self) -> np.ndarray:
        tri = self.triangles()
        cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        norm = np.linalg.norm(cross, axis=1, keepdims=True)
        norm[norm == 0.0] = 1.0
        return cross / norm

    def area(self) -> float:
        return float(self.face_areas().sum())

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        if self.n_vertices == 0:
            raise EmptyGeometry("mesh has no vertices")
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def transformed(self, linear: np.ndarray | None = None,
                    translation: np.ndarray | None = None) -> "TriMesh":
        v = self.vertices
        if linear is not None:
            v = v @ np.asarray(linear, dtype=np.float64).T
        if translation is not None:
            v = v + np.asarray(translation, dtype=np.float64)
        return TriMesh(v, self.faces)

    def drop_degenerate_faces(self, min_area: float = DEGENERATE_AREA) -> "TriMesh":
        areas = self.face_areas()
        keep = areas >= min_area
        dropped = int((~keep).sum())
        if dropped:
            logger.warning("dropping %d degenerate face(s) (area < %g)", dropped, min_area)
            return TriMesh(self.vertices, self.faces[keep])
        return self


def merge_meshes(meshes: list[TriMesh]) -> TriMesh:
    """Concatenate meshes into one (vertices deduplication is not attempted)."""
    verts, faces, offset = [], [], 0
    for m in meshes:
        verts.append(m.vertices)
        faces.append(m.faces + offset)
        offset += m.n_vertices
    return TriMesh(np.concatenate(verts), np.concatenate(faces))


MESH_MAGIC = b"PHYSMSH1"


def mesh_to_bytes(mesh: TriMesh) -> bytes:
    """Little-endian wire format: 8-byte magic, <II vertex/face counts,
    vertices as <f4 xyz triples, faces as <i4 index triples."""
    import struct
    return b"".join([
        MESH_MAGIC,
        struct.pack("<II", mesh.n_vertices, mesh.n_faces),
        np.ascontiguousarray(mesh.vertices, dtype="<f4").tobytes(),
        np.ascontiguousarray(mesh.faces, dtype="<i4").tobytes(),
    ])


def mesh_from_bytes(blob: bytes) -> TriMesh:
    import struct
    if blob[:8] != MESH_MAGIC:
        raise MeshParseError("<bytes>", 0, "bad magic")
    nv, nf = struct.unpack_from("<II", blob, 8)
    off = 16
    verts = np.frombuffer(blob, dtype="<f4", count=nv * 3, offset=off).reshape(nv, 3)
    off += nv * 12
    faces = np.frombuffer(blob, dtype="<i4", count=nf * 3, offset=off).reshape(nf, 3)
    return TriMesh(verts.astype(np.float64), faces.astype(np.int32))


def load_obj(path) -> TriMesh:
    """Parse an OBJ file (v/f records). Raises MeshParseError with file+line."""
    path = Path(path)
    vertices: list[list[float]] = []
    faces: list[list[int]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            fieldsplit = stripped.split()
            tag = fieldsplit[0]
            if tag == "v":
                if len(fieldsplit) < 4:
                    raise MeshParseError(str(path), line_no, "vertex needs 3 coordinates")
                try:
                    vertices.append([float(x) for x in fieldsplit[1:4]])
                except ValueError as exc:
                    raise MeshParseError(str(path), line_no, f"bad vertex coordinate: {exc}") from None
            elif tag == "f":
                if len(fieldsplit) < 4:
                    raise MeshParseError(str(path), line_no, "face needs >= 3 vertices")
                idx = []
                for token in fieldsplit[1:]:
                    head = token.split("/")[0]
                    try:
                        i = int(head)
                    except ValueError:
                        raise MeshParseError(str(path), line_no, f"bad face index {token!r}") from None
                    if i < 0:
                        i = len(vertices) + 1 + i
                    if not (1 <= i <= len(vertices)):
                        raise MeshParseError(str(path), line_no, f"face index {i} out of range")
                    idx.append(i - 1)
                for k in range(1, len(idx) - 1):
                    faces.append([idx[0], idx[k], idx[k + 1]])
            # everything else (vn, vt, mtllib, usemtl, o, g, s) is ignored
    if not faces:
        raise MeshParseError(str(path), 0, "no faces found")
    return TriMesh(np.array(vertices), np.array(faces))


def save_obj(mesh: TriMesh, path) -> None:
    """Write v/f records; %.17g keeps float64 coordinates exact on reload."""
    path = Path(path)
    lines = []
    for v in mesh.vertices:
        lines.append(f"v {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}")
    for f in mesh.faces:
        lines.append(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
