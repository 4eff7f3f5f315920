"""Cut a mesh open along a seam.

Predicted seam endpoints are snapped to their nearest mesh vertices, joined by
shortest paths over the edge graph, and the surface is split by giving every
seam vertex one copy per fan sector.
"""

from __future__ import annotations

import heapq
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .codec import SeamSequence
from .extract import SeamEdgeSet
from .mesh import (EdgeKey, MeshError, TriMesh, _DisjointSet, boundary_loops, face_components,
                   save_obj, topology)

log = logging.getLogger(__name__)


@dataclass
class CutReport:
    degenerate_pairs: int = 0
    unreachable_pairs: list[tuple[int, int]] = field(default_factory=list)
    boundary_edges_ignored: int = 0
    isolated_edges_ignored: list[EdgeKey] = field(default_factory=list)
    duplicated_vertices: int = 0
    warnings: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "degenerate_pairs": self.degenerate_pairs,
            "unreachable_pairs": [list(p) for p in self.unreachable_pairs],
            "boundary_edges_ignored": self.boundary_edges_ignored,
            "isolated_edges_ignored": [list(e) for e in self.isolated_edges_ignored],
            "duplicated_vertices": self.duplicated_vertices,
            "warnings": list(self.warnings),
        }


@dataclass
class CutResult:
    cut_mesh: TriMesh
    charts: list[list[int]]
    vertex_origin: np.ndarray
    applied_seam_edges: SeamEdgeSet
    report: CutReport = field(default_factory=CutReport)

    def chart_mesh(self, k: int) -> tuple[TriMesh, np.ndarray]:
        """Chart ``k`` as a standalone mesh with its cut-mesh vertex ids."""
        return self.cut_mesh.submesh(self.charts[k])

    def save(self, obj_path, chart_path) -> None:
        save_obj(self.cut_mesh, obj_path)
        with open(chart_path, "w") as fh:
            json.dump({"charts": self.charts,
                       "vertex_origin": [int(v) for v in self.vertex_origin]}, fh)


# ---------------------------------------------------------------------------
# snapping


def nearest_vertices(points: np.ndarray, vertices: np.ndarray, max_block: int = 2_000_000) -> np.ndarray:
    """Index of the nearest vertex for each point; exact ties go to the lowest index.

    Brute force in blocks of at most ``max_block`` point-vertex distances.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    chunk = max(1, max_block // max(len(vertices), 1))
    out = np.empty(len(points), dtype=np.int64)
    for s in range(0, len(points), chunk):
        p = points[s:s + chunk]
        d = ((p[:, None, :] - vertices[None, :, :]) ** 2).sum(-1)
        out[s:s + chunk] = d.argmin(axis=1)  # argmin returns the first minimum
    return out


def snap_to_vertices(seam: SeamSequence, mesh: TriMesh,
                     report: CutReport | None = None) -> list[tuple[int, int]]:
    """Map each segment to a vertex pair, dropping pairs that collapse onto one vertex."""
    if seam.n_segments == 0:
        return []
    ends = nearest_vertices(seam.as_array().reshape(-1, 3), mesh.vertices).reshape(-1, 2)
    pairs = []
    dropped = 0
    for a, b in ends:
        if a == b:
            dropped += 1
        else:
            pairs.append((int(a), int(b)))
    if report is not None:
        report.degenerate_pairs += dropped
    return pairs


# ---------------------------------------------------------------------------
# geodesic paths over the edge graph


def _adjacency(mesh: TriMesh) -> list[list[tuple[int, float]]]:
    adj: list[list[tuple[int, float]]] = [[] for _ in range(mesh.n_vertices)]
    for (a, b), w in zip(mesh.edges.tolist(), mesh.edge_lengths().tolist()):
        adj[a].append((b, w))
        adj[b].append((a, w))
    return adj


def dijkstra(adj, source: int, target: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Single-source shortest paths; returns ``(dist, predecessor)``.

    Equal-cost alternatives resolve toward the lower-index predecessor, so
    paths are deterministic.
    """
    n = len(adj)
    dist = np.full(n, np.inf)
    pred = np.full(n, -1, dtype=np.int64)
    dist[source] = 0.0
    heap = [(0.0, source)]
    done = np.zeros(n, dtype=bool)
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        if u == target:
            break
        for v, w in adj[u]:
            nd = d + w
            if nd < dist[v] or (nd == dist[v] and not done[v] and u < pred[v]):
                dist[v] = nd
                pred[v] = u
                heapq.heappush(heap, (nd, v))
    return dist, pred


def shortest_path(adj, a: int, b: int) -> list[int] | None:
    dist, pred = dijkstra(adj, a, b)
    if not np.isfinite(dist[b]):
        return None
    path = [b]
    while path[-1] != a:
        path.append(int(pred[path[-1]]))
    return path[::-1]


def connect_geodesic(pairs, mesh: TriMesh, report: CutReport | None = None) -> SeamEdgeSet:
    """Union of shortest edge paths joining each vertex pair."""
    adj = _adjacency(mesh)
    edges: set[EdgeKey] = set()
    for a, b in pairs:
        path = shortest_path(adj, a, b)
        if path is None:
            if report is not None:
                report.unreachable_pairs.append((a, b))
            continue
        edges.update(EdgeKey.of(u, v) for u, v in zip(path[:-1], path[1:]))
    return SeamEdgeSet(edges)


# ---------------------------------------------------------------------------
# topological cutting


def cut_along_edges(mesh: TriMesh, seam: SeamEdgeSet | set) -> CutResult:
    """Duplicate seam vertices per fan sector so the seam edges become boundary.

    Sectors around a vertex are its incident faces grouped through incident
    edges that are neither seam edges nor open/non-manifold. Original boundary
    edges in the seam are ignored (already open), as are isolated single-edge
    seam components with both endpoints interior, which cannot open without
    pinching the surface. Both are listed in the report.
    """
    report = CutReport()
    keys = set(seam.edges if isinstance(seam, SeamEdgeSet) else seam)
    index = mesh.edge_index
    for key in sorted(keys):
        if key not in index:
            raise MeshError(f"seam edge {tuple(key)} is not an edge of the mesh")
    counts = mesh.edge_face_count
    applied = set()
    for key in keys:
        if counts[index[key]] < 2:
            report.boundary_edges_ignored += 1
        else:
            applied.add(key)

    seam_degree = np.zeros(mesh.n_vertices, dtype=np.int64)
    for a, b in applied:
        seam_degree[a] += 1
        seam_degree[b] += 1
    on_boundary = np.zeros(mesh.n_vertices, dtype=bool)
    on_boundary[mesh.edges[counts == 1].ravel()] = True
    for key in sorted(applied):
        a, b = key
        if seam_degree[a] == 1 and seam_degree[b] == 1 and not on_boundary[a] and not on_boundary[b]:
            report.isolated_edges_ignored.append(key)
    for key in report.isolated_edges_ignored:
        applied.discard(key)
        seam_degree[key.a] -= 1
        seam_degree[key.b] -= 1

    vertex_faces: dict[int, list[tuple[int, int]]] = {}
    seam_vertices = np.flatnonzero(seam_degree > 0)
    seam_set = set(seam_vertices.tolist())
    for f, tri in enumerate(mesh.faces.tolist()):
        for j, v in enumerate(tri):
            if v in seam_set:
                vertex_faces.setdefault(v, []).append((f, j))

    faces = mesh.faces.copy()
    origin = list(range(mesh.n_vertices))
    edge_faces = mesh.edge_faces
    for v in seam_vertices.tolist():
        corners = vertex_faces[v]
        local = {f: i for i, (f, _) in enumerate(corners)}
        ds = _DisjointSet(len(corners))
        for f, j in corners:
            tri = mesh.faces[f]
            for w in (tri[(j + 1) % 3], tri[(j + 2) % 3]):
                key = EdgeKey.of(v, w)
                if key in applied:
                    continue
                fs = edge_faces[index[key]]
                if len(fs) == 2:
                    ds.union(local[fs[0]], local[fs[1]])
        groups: dict[int, list[int]] = {}
        for i in range(len(corners)):
            groups.setdefault(ds.find(i), []).append(i)
        sectors = sorted(groups.values(), key=lambda g: corners[g[0]][0])
        for sector in sectors[1:]:
            new = len(origin)
            origin.append(v)
            for i in sector:
                f, j = corners[i]
                faces[f, j] = new
        report.duplicated_vertices += len(sectors) - 1

    origin = np.asarray(origin, dtype=np.int64)
    vertices = mesh.vertices[origin]
    cut = TriMesh(vertices, faces, mesh.uv_corners)
    charts = face_components(cut)
    return CutResult(cut, charts, origin, SeamEdgeSet(applied, charts), report)


def apply_seams(mesh: TriMesh, seam: SeamSequence) -> CutResult:
    """Snap, connect and cut. ``mesh`` must be in the seam's normalized frame."""
    report = CutReport()
    pairs = snap_to_vertices(seam, mesh, report)
    edge_set = connect_geodesic(pairs, mesh, report)
    if not edge_set.edges:
        report.warnings.append("seam has no effective edges; mesh left uncut")
        log.warning("seam has no effective edges; mesh left uncut")
    result = cut_along_edges(mesh, edge_set)
    result.report.degenerate_pairs = report.degenerate_pairs
    result.report.unreachable_pairs = report.unreachable_pairs
    result.report.warnings = report.warnings + result.report.warnings
    return result


# ---------------------------------------------------------------------------
# disk repair


def _disk_cut_path(chart: TriMesh) -> list[int] | None:
    """Vertex path whose cut brings a genus-0 chart one step closer to a disk.

    Closed charts are slit along an approximate diameter (at least two edges,
    so the slit actually opens); charts with several boundary loops get the
    shortest path from the first loop to the nearest other loop.
    """
    t = topology(chart)
    if t.is_disk or t.n_components != 1 or t.genus != 0 or not t.manifold:
        return None
    adj = _adjacency(chart)
    if t.n_boundary_loops == 0:
        d, _ = dijkstra(adj, 0)
        a = int(np.argmax(np.where(np.isfinite(d), d, -1.0)))
        d, _ = dijkstra(adj, a)
        b = int(np.argmax(np.where(np.isfinite(d), d, -1.0)))
        path = shortest_path(adj, a, b)
        if path is not None and len(path) == 2:
            common = sorted({w for w, _ in adj[a]} & {w for w, _ in adj[b]})
            path = [a, common[0], b] if common else None
        return path
    loops = boundary_loops(chart)
    src = chart.n_vertices
    adj.append([(v, 0.0) for v in loops[0]])
    dist, pred = dijkstra(adj, src)
    others = np.array([v for loop in loops[1:] for v in loop])
    target = int(others[np.argmin(dist[others])])
    if not np.isfinite(dist[target]):
        return None
    path = [target]
    while pred[path[-1]] != src:
        path.append(int(pred[path[-1]]))
    return path[::-1]


def repair_charts(mesh: TriMesh, result: CutResult, max_rounds: int = 16) -> tuple[CutResult, int]:
    """Add cuts until every genus-0 chart is a disk; returns the new result and cut count.

    Charts of higher genus or with non-manifold topology are left alone.
    """
    edges = set(result.applied_seam_edges.edges)
    base = result.report
    added = 0
    for _ in range(max_rounds):
        new = set()
        for chart in result.charts:
            sub, used = result.cut_mesh.submesh(chart)
            path = _disk_cut_path(sub)
            if path is None:
                continue
            ids = result.vertex_origin[used[np.asarray(path)]]
            new.update(EdgeKey.of(int(u), int(v)) for u, v in zip(ids[:-1], ids[1:]))
        new -= edges
        if not new:
            break
        edges |= new
        added += 1
        result = cut_along_edges(mesh, edges)
    result.report.degenerate_pairs = base.degenerate_pairs
    result.report.unreachable_pairs = base.unreachable_pairs
    result.report.warnings = base.warnings + result.report.warnings
    return result, added
