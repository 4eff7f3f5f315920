"""Indexed triangle meshes, Wavefront OBJ I/O and topology queries."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Optional

import numpy as np


class MeshError(ValueError):
    """Raised for malformed mesh input."""


class ObjParseError(MeshError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyMeshError(MeshError):
    pass


class EdgeKey(NamedTuple):
    """Undirected edge in canonical ``a < b`` form."""

    a: int
    b: int

    @classmethod
    def of(cls, u: int, v: int) -> "EdgeKey":
        u, v = int(u), int(v)
        return cls(u, v) if u < v else cls(v, u)


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Immutable indexed triangle mesh.

    ``uv_corners`` holds one 2D coordinate per face corner, shape ``(F, 3, 2)``,
    or ``None`` when the mesh carries no parameterization.
    """

    vertices: np.ndarray
    faces: np.ndarray
    uv_corners: Optional[np.ndarray] = None

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3))
        f = np.ascontiguousarray(np.asarray(self.faces, dtype=np.int64).reshape(-1, 3))
        if len(f) and (f.min() < 0 or f.max() >= len(v)):
            raise MeshError("face index out of range")
        if len(f) and np.any((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])):
            raise MeshError("face repeats a vertex")
        uv = self.uv_corners
        if uv is not None:
            uv = np.asarray(uv, dtype=np.float64)
            if uv.size != len(f) * 3 * 2:
                raise MeshError(f"uv_corners has {uv.size // 2} corners, expected {3 * len(f)}")
            uv = np.ascontiguousarray(uv.reshape(-1, 3, 2))
            uv.setflags(write=False)
        v.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        object.__setattr__(self, "uv_corners", uv)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def has_uv(self) -> bool:
        return self.uv_corners is not None

    @cached_property
    def _edge_table(self):
        he = np.stack([self.faces, np.roll(self.faces, -1, axis=1)], axis=-1).reshape(-1, 2)
        keys = np.sort(he, axis=1)
        if len(keys) == 0:
            return np.zeros((0, 2), np.int64), np.zeros((0, 3), np.int64)
        edges, inverse = np.unique(keys, axis=0, return_inverse=True)
        return edges, inverse.reshape(-1, 3)

    @property
    def edges(self) -> np.ndarray:
        """Unique undirected edges ``(E, 2)``, sorted, each row ``a < b``."""
        return self._edge_table[0]

    @property
    def face_edges(self) -> np.ndarray:
        """``face_edges[f, j]`` is the edge id of corner pair ``(j, j+1)`` of face ``f``."""
        return self._edge_table[1]

    @cached_property
    def edge_faces(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(len(self.edges))]
        for f, row in enumerate(self.face_edges):
            for e in row:
                out[e].append(f)
        return out

    @cached_property
    def edge_face_count(self) -> np.ndarray:
        return np.bincount(self.face_edges.ravel(), minlength=len(self.edges))

    @cached_property
    def edge_index(self) -> dict[EdgeKey, int]:
        return {EdgeKey(int(a), int(b)): i for i, (a, b) in enumerate(self.edges)}

    def edge_id(self, u: int, v: int) -> int:
        return self.edge_index[EdgeKey.of(u, v)]

    def boundary_edges(self) -> np.ndarray:
        return self.edges[self.edge_face_count == 1]

    def euler_characteristic(self) -> int:
        used = len(np.unique(self.faces)) if self.n_faces else 0
        return used - len(self.edges) + self.n_faces

    def face_areas(self) -> np.ndarray:
        p = self.vertices[self.faces]
        return 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)

    def edge_lengths(self) -> np.ndarray:
        return np.linalg.norm(self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]], axis=1)

    def with_vertices(self, vertices: np.ndarray) -> "TriMesh":
        return TriMesh(vertices, self.faces, self.uv_corners)

    def submesh(self, face_ids) -> tuple["TriMesh", np.ndarray]:
        """Extract faces into a compact mesh; returns the mesh and local→global vertex ids."""
        face_ids = np.asarray(face_ids, dtype=np.int64)
        sub = self.faces[face_ids]
        used, local = np.unique(sub, return_inverse=True)
        uv = None if self.uv_corners is None else self.uv_corners[face_ids]
        return TriMesh(self.vertices[used], local.reshape(-1, 3), uv), used


# ---------------------------------------------------------------------------
# topology helpers


class _DisjointSet:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            if ra < rb:
                self.parent[rb] = ra
            else:
                self.parent[ra] = rb


def face_components(mesh: TriMesh, blocked_edges: Optional[set] = None) -> list[list[int]]:
    """Connected face components through shared edges not listed in ``blocked_edges``.

    Components are ordered by their smallest face index; faces inside each are sorted.
    """
    ds = _DisjointSet(mesh.n_faces)
    blocked = blocked_edges or set()
    for e, fs in enumerate(mesh.edge_faces):
        if len(fs) < 2:
            continue
        a, b = mesh.edges[e]
        if EdgeKey(int(a), int(b)) in blocked:
            continue
        for f in fs[1:]:
            ds.union(fs[0], f)
    groups: dict[int, list[int]] = {}
    for f in range(mesh.n_faces):
        groups.setdefault(ds.find(f), []).append(f)
    return sorted(groups.values(), key=lambda g: g[0])


def boundary_loops(mesh: TriMesh) -> list[list[int]]:
    """Boundary loops as vertex cycles, ordered by smallest vertex id.

    On non-manifold boundaries a loop is a connected component of the
    boundary-edge graph, listed in traversal order.
    """
    bnd = mesh.boundary_edges()
    if len(bnd) == 0:
        return []
    nbrs: dict[int, list[int]] = {}
    for a, b in bnd:
        nbrs.setdefault(int(a), []).append(int(b))
        nbrs.setdefault(int(b), []).append(int(a))
    seen: set[int] = set()
    loops = []
    for start in sorted(nbrs):
        if start in seen:
            continue
        loop = []
        stack = [start]
        while stack:
            v = stack.pop()
            if v in seen:
                continue
            seen.add(v)
            loop.append(v)
            stack.extend(sorted(nbrs[v], reverse=True))
        loops.append(loop)
    return loops


@dataclass
class TopologyReport:
    n_components: int
    euler_characteristic: int
    n_boundary_loops: int
    genus: int
    manifold: bool

    @property
    def is_disk(self) -> bool:
        return (self.n_components == 1 and self.euler_characteristic == 1
                and self.n_boundary_loops == 1 and self.manifold)


def topology(mesh: TriMesh) -> TopologyReport:
    comps = face_components(mesh)
    chi = mesh.euler_characteristic()
    loops = len(boundary_loops(mesh))
    manifold = bool(np.all(mesh.edge_face_count <= 2)) and all(s.manifold for s in vertex_adjacency(mesh))
    # chi = 2 - 2g - b per component; only meaningful for one component
    genus = (2 - chi - loops) // 2 if len(comps) == 1 else -1
    return TopologyReport(len(comps), chi, loops, genus, manifold)


@dataclass
class VertexStar:
    """Incident edges and faces of one vertex.

    For manifold stars, ``faces`` is in fan order and ``edges[i]`` separates
    ``faces[i-1]`` from ``faces[i]`` (with an extra trailing edge for open fans).
    """

    edges: list[int] = field(default_factory=list)
    faces: list[int] = field(default_factory=list)
    manifold: bool = True
    boundary: bool = False


def vertex_adjacency(mesh: TriMesh) -> list[VertexStar]:
    stars = [VertexStar() for _ in range(mesh.n_vertices)]
    vf: list[list[int]] = [[] for _ in range(mesh.n_vertices)]
    for f, tri in enumerate(mesh.faces):
        for v in tri:
            vf[v].append(f)
    ve: list[list[int]] = [[] for _ in range(mesh.n_vertices)]
    for e, (a, b) in enumerate(mesh.edges):
        ve[a].append(e)
        ve[b].append(e)
    counts = mesh.edge_face_count
    edge_faces = mesh.edge_faces

    for v in range(mesh.n_vertices):
        star = stars[v]
        faces, edges = vf[v], ve[v]
        if not faces:
            star.edges = list(edges)
            continue
        if any(counts[e] > 2 for e in edges):
            star.manifold = False
        # fan walk: faces linked through incident edges with exactly two faces
        link: dict[int, list[tuple[int, int]]] = {f: [] for f in faces}
        for e in edges:
            fs = edge_faces[e]
            if len(fs) == 2:
                link[fs[0]].append((e, fs[1]))
                link[fs[1]].append((e, fs[0]))
        open_edges = [e for e in edges if counts[e] == 1]
        star.boundary = bool(open_edges)
        ends = [f for f in faces if len(link[f]) < 2]
        start = min(ends) if ends else min(faces)
        order, order_edges = [start], []
        if ends:
            lead = [e for e in open_edges if start in edge_faces[e]]
            if lead:
                order_edges.append(min(lead))
        prev_edge = None
        cur = start
        while True:
            nxt = [(e, g) for e, g in sorted(link[cur]) if e != prev_edge]
            if not nxt:
                break
            e, g = nxt[0]
            if g == start:
                order_edges.append(e)
                break
            if g in order:
                break
            order_edges.append(e)
            order.append(g)
            prev_edge, cur = e, g
        if ends:
            tail = [e for e in open_edges if cur in edge_faces[e] and e not in order_edges]
            if tail:
                order_edges.append(min(tail))
        bad_ends = len(ends) not in (0, 2) and not (len(faces) == 1)
        if len(order) != len(faces) or bad_ends or len(set(order_edges)) != len(edges):
            star.manifold = False
            star.faces = sorted(faces)
            star.edges = sorted(edges)
        else:
            star.faces = order
            star.edges = order_edges
    return stars


# ---------------------------------------------------------------------------
# OBJ I/O


def _resolve(idx: str, count: int, lineno: int) -> int:
    try:
        i = int(idx)
    except ValueError:
        raise ObjParseError(f"malformed index {idx!r}", lineno) from None
    if i > 0:
        j = i - 1
    elif i < 0:
        j = count + i
    else:
        raise ObjParseError("index 0 is invalid in OBJ", lineno)
    if not 0 <= j < count:
        raise ObjParseError(f"index {i} out of range ({count} available)", lineno)
    return j


def load_obj(path) -> TriMesh:
    """Read a Wavefront OBJ file.

    Supports ``v``, ``vt`` and ``f`` records (``i``, ``i/t``, ``i/t/n``, ``i//n``)
    with 1-based or negative indices. Polygons are fan-triangulated. Normals,
    materials, groups and other directives are ignored.
    """
    verts: list[tuple[float, float, float]] = []
    texcoords: list[tuple[float, float]] = []
    faces: list[tuple[int, int, int]] = []
    corner_uv: list[tuple[int, int, int]] = []
    any_uv = False
    all_uv = True
    with open(path, "r", encoding="ascii", errors="replace") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            tag = parts[0]
            if tag == "v":
                if len(parts) < 4:
                    raise ObjParseError("vertex needs 3 coordinates", lineno)
                try:
                    verts.append((float(parts[1]), float(parts[2]), float(parts[3])))
                except ValueError:
                    raise ObjParseError("malformed vertex coordinate", lineno) from None
            elif tag == "vt":
                if len(parts) < 3:
                    raise ObjParseError("texture coordinate needs 2 values", lineno)
                try:
                    texcoords.append((float(parts[1]), float(parts[2])))
                except ValueError:
                    raise ObjParseError("malformed texture coordinate", lineno) from None
            elif tag == "f":
                if len(parts) < 4:
                    raise ObjParseError("face needs at least 3 corners", lineno)
                vi, ti = [], []
                for corner in parts[1:]:
                    fields = corner.split("/")
                    vi.append(_resolve(fields[0], len(verts), lineno))
                    if len(fields) > 1 and fields[1]:
                        ti.append(_resolve(fields[1], len(texcoords), lineno))
                if ti and len(ti) != len(vi):
                    raise ObjParseError("face mixes corners with and without texture indices", lineno)
                if len(set(vi)) != len(vi):
                    raise ObjParseError("face repeats a vertex", lineno)
                any_uv |= bool(ti)
                all_uv &= bool(ti)
                for k in range(1, len(vi) - 1):
                    faces.append((vi[0], vi[k], vi[k + 1]))
                    corner_uv.append((ti[0], ti[k], ti[k + 1]) if ti else (-1, -1, -1))
    if not verts or not faces:
        raise EmptyMeshError(f"{os.fspath(path)}: mesh has no {'vertices' if not verts else 'faces'}")
    if any_uv and not all_uv:
        raise ObjParseError("some faces carry texture indices and some do not")
    uv = None
    if any_uv:
        uv = np.asarray(texcoords, dtype=np.float64)[np.asarray(corner_uv)]
    return TriMesh(np.asarray(verts), np.asarray(faces), uv)


def _fmt(x: float) -> str:
    s = f"{x:.9g}"
    return "0" if s == "-0" else s


def save_obj(mesh: TriMesh, path) -> None:
    """Write ``mesh`` as OBJ with 9 significant digits; output is byte-deterministic."""
    lines = ["# seamcut"]
    for x, y, z in mesh.vertices:
        lines.append(f"v {_fmt(x)} {_fmt(y)} {_fmt(z)}")
    if mesh.uv_corners is None:
        for a, b, c in mesh.faces + 1:
            lines.append(f"f {a} {b} {c}")
    else:
        # share vt records between identical corner coordinates, first-seen order
        table: dict[tuple[str, str], int] = {}
        refs = []
        for u, v in mesh.uv_corners.reshape(-1, 2):
            key = (_fmt(u), _fmt(v))
            if key not in table:
                table[key] = len(table) + 1
                lines.append(f"vt {key[0]} {key[1]}")
            refs.append(table[key])
        for fi, (a, b, c) in enumerate(mesh.faces + 1):
            ta, tb, tc = refs[3 * fi: 3 * fi + 3]
            lines.append(f"f {a}/{ta} {b}/{tb} {c}/{tc}")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# normalization


@dataclass(frozen=True)
class NormalizeTransform:
    """``normalized = (original - center) * scale``."""

    center: np.ndarray
    scale: float

    def apply(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) - self.center) * self.scale

    def inverse(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) / self.scale + self.center

    @property
    def inverse_scale(self) -> float:
        return 1.0 / self.scale


def normalize_to_unit_cube(mesh: TriMesh) -> tuple[TriMesh, NormalizeTransform]:
    """Uniformly scale and center ``mesh`` so its bounding box fits ``[-1, 1]^3``."""
    if mesh.n_vertices == 0:
        raise MeshError("cannot normalize a mesh with no vertices")
    lo, hi = mesh.vertices.min(axis=0), mesh.vertices.max(axis=0)
    extent = float((hi - lo).max())
    if extent <= 0.0:
        raise MeshError("mesh has zero extent along every axis")
    tf = NormalizeTransform(center=(lo + hi) / 2.0, scale=2.0 / extent)
    v = np.clip(tf.apply(mesh.vertices), -1.0, 1.0)
    return mesh.with_vertices(v), tf
