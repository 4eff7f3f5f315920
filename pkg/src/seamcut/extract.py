"""Ground-truth seams from an existing UV layout.

An interior edge is a seam when its incident faces disagree on the UV
coordinate of either shared endpoint. Open (3D boundary) edges are never
seams: cutting them would change nothing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .codec import SeamSequence, seam_from_edges
from .mesh import EdgeKey, MeshError, TriMesh, face_components, normalize_to_unit_cube, topology

UV_TOL = 1e-7


@dataclass
class SeamEdgeSet:
    edges: set[EdgeKey]
    islands: list[list[int]] = field(default_factory=list)

    def sorted_edges(self) -> list[EdgeKey]:
        return sorted(self.edges)

    def to_json(self) -> dict:
        return {"seam_edges": [list(e) for e in self.sorted_edges()],
                "islands": [list(map(int, isl)) for isl in self.islands]}

    @classmethod
    def from_json(cls, obj: dict) -> "SeamEdgeSet":
        return cls({EdgeKey.of(a, b) for a, b in obj["seam_edges"]},
                   [list(isl) for isl in obj.get("islands", [])])

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)


def _corner_uv(mesh: TriMesh, face: int, vertex: int) -> np.ndarray:
    row = mesh.faces[face]
    j = int(np.flatnonzero(row == vertex)[0])
    return mesh.uv_corners[face, j]


def _require_uv(mesh: TriMesh) -> None:
    if mesh.uv_corners is None:
        raise MeshError("mesh has no UV coordinates")
    if mesh.uv_corners.shape != (mesh.n_faces, 3, 2):
        raise MeshError("face corner / UV count mismatch")


def seam_edge_keys(mesh: TriMesh, tol: float = UV_TOL) -> set[EdgeKey]:
    _require_uv(mesh)
    seams = set()
    for e, fs in enumerate(mesh.edge_faces):
        if len(fs) < 2:
            continue
        a, b = (int(x) for x in mesh.edges[e])
        for v in (a, b):
            ref = _corner_uv(mesh, fs[0], v)
            if any(np.max(np.abs(_corner_uv(mesh, f, v) - ref)) > tol for f in fs[1:]):
                seams.add(EdgeKey(a, b))
                break
    return seams


def extract_seams(mesh: TriMesh, tol: float = UV_TOL) -> tuple[SeamEdgeSet, SeamSequence]:
    """Seam edges and UV islands of ``mesh``, plus the seam as a canonical sequence.

    The sequence is expressed in the frame of ``normalize_to_unit_cube(mesh)``.
    """
    keys = seam_edge_keys(mesh, tol)
    islands = face_components(mesh, keys)
    normalized, _ = normalize_to_unit_cube(mesh)
    seq = seam_from_edges(normalized.vertices, sorted(keys))
    return SeamEdgeSet(keys, islands), seq


def uv_islands(mesh: TriMesh, tol: float = UV_TOL) -> list[list[int]]:
    """Islands from UV connectivity alone: faces sharing two welded UV corners.

    Corners are welded when they reference the same 3D vertex and their UV
    coordinates agree within ``tol``. Independent of :func:`seam_edge_keys`.
    """
    _require_uv(mesh)
    corner_ids: dict[tuple[int, int, int], int] = {}
    welded = np.empty((mesh.n_faces, 3), dtype=np.int64)
    scale = 1.0 / tol
    for f in range(mesh.n_faces):
        for j in range(3):
            u, v = np.rint(mesh.uv_corners[f, j] * scale).astype(np.int64)
            key = (int(mesh.faces[f, j]), int(u), int(v))
            welded[f, j] = corner_ids.setdefault(key, len(corner_ids))
    owner: dict[tuple[int, int], list[int]] = {}
    for f in range(mesh.n_faces):
        w = welded[f]
        for j in range(3):
            a, b = int(w[j]), int(w[(j + 1) % 3])
            owner.setdefault((min(a, b), max(a, b)), []).append(f)
    parent = list(range(mesh.n_faces))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for fs in owner.values():
        for g in fs[1:]:
            ra, rb = find(fs[0]), find(g)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    groups: dict[int, list[int]] = {}
    for f in range(mesh.n_faces):
        groups.setdefault(find(f), []).append(f)
    return sorted(groups.values(), key=lambda g: g[0])


# ---------------------------------------------------------------------------
# layout validation


@dataclass
class UVLayoutReport:
    degenerate_faces: list[int] = field(default_factory=list)
    flipped_faces: list[int] = field(default_factory=list)
    overlapping_pairs: list[tuple[int, int]] = field(default_factory=list)
    non_disk_islands: list[int] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.degenerate_faces or self.flipped_faces
                    or self.overlapping_pairs or self.non_disk_islands)

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "degenerate_faces": self.degenerate_faces,
            "flipped_faces": self.flipped_faces,
            "overlapping_pairs": [list(p) for p in self.overlapping_pairs],
            "non_disk_islands": self.non_disk_islands,
        }


def _signed_areas(tris: np.ndarray) -> np.ndarray:
    d1 = tris[:, 1] - tris[:, 0]
    d2 = tris[:, 2] - tris[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def triangles_overlap(t1: np.ndarray, t2: np.ndarray, eps: float = 1e-12) -> bool:
    """True when the interiors of two 2D triangles intersect (separating axis test).

    Triangles that only touch along an edge or at a vertex do not overlap.
    """
    for tri in (t1, t2):
        for i in range(3):
            d = tri[(i + 1) % 3] - tri[i]
            axis = np.array([-d[1], d[0]])
            norm = np.hypot(*axis)
            if norm == 0.0:
                continue
            axis /= norm
            p1, p2 = t1 @ axis, t2 @ axis
            if min(p1.max(), p2.max()) - max(p1.min(), p2.min()) <= eps:
                return False
    return True


def _island_is_disk(mesh: TriMesh, faces: list[int], tol: float) -> bool:
    # weld corners of this island by (vertex, uv); the island's own topology
    ids: dict[tuple[int, int, int], int] = {}
    local = np.empty((len(faces), 3), dtype=np.int64)
    for k, f in enumerate(faces):
        for j in range(3):
            u, v = np.rint(mesh.uv_corners[f, j] / tol).astype(np.int64)
            local[k, j] = ids.setdefault((int(mesh.faces[f, j]), int(u), int(v)), len(ids))
    sub = TriMesh(np.zeros((len(ids), 3)), local)
    t = topology(sub)
    return t.n_components == 1 and t.euler_characteristic == 1 and t.n_boundary_loops == 1


def validate_uv_layout(mesh: TriMesh, tol: float = UV_TOL, grid_cells: int = 64) -> UVLayoutReport:
    """Advisory checks on a UV layout.

    Flags degenerate and flipped UV triangles, pairs of UV triangles whose
    interiors overlap anywhere in the layout (uniform grid broad phase with
    ``grid_cells`` cells per axis), and islands that are not topological disks.
    """
    _require_uv(mesh)
    report = UVLayoutReport()
    area = _signed_areas(mesh.uv_corners)
    for f in np.flatnonzero(np.abs(area) <= 1e-14):
        report.degenerate_faces.append(int(f))
    for f in np.flatnonzero(area < -1e-14):
        report.flipped_faces.append(int(f))

    uv = mesh.uv_corners
    lo = uv.reshape(-1, 2).min(axis=0)
    span = np.maximum(uv.reshape(-1, 2).max(axis=0) - lo, 1e-12)
    cell = span / grid_cells
    buckets: dict[tuple[int, int], list[int]] = {}
    for f in range(mesh.n_faces):
        bmin = np.floor((uv[f].min(axis=0) - lo) / cell).astype(int)
        bmax = np.floor((uv[f].max(axis=0) - lo) / cell).astype(int)
        for i in range(bmin[0], bmax[0] + 1):
            for j in range(bmin[1], bmax[1] + 1):
                buckets.setdefault((i, j), []).append(f)
    tested: set[tuple[int, int]] = set()
    for members in buckets.values():
        for x in range(len(members)):
            for y in range(x + 1, len(members)):
                pair = (members[x], members[y])
                if pair in tested:
                    continue
                tested.add(pair)
                if triangles_overlap(uv[pair[0]], uv[pair[1]]):
                    report.overlapping_pairs.append(pair)

    islands = face_components(mesh, seam_edge_keys(mesh, tol))
    for k, island in enumerate(islands):
        if not _island_is_disk(mesh, island, tol):
            report.non_disk_islands.append(k)
    report.overlapping_pairs.sort()
    return report
