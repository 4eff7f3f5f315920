"""Shape-conditioning point clouds.

Half the budget lands on mesh vertices (cycled in index order when the budget
exceeds the vertex count), half on mesh edges, allocated in proportion to
edge length. Edge samples sit at ``(k + 0.5) / K`` along each edge so they
never duplicate an endpoint.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .mesh import MeshError, TriMesh

VERTEX = 0
EDGE = 1
SURFACE = 2
PAPER_BUDGET = 61_440
DEFAULT_BUDGET = 4_096


@dataclass(frozen=True)
class ConditionCloud:
    points: np.ndarray  # (N, 3)
    tags: np.ndarray  # (N,) uint8, VERTEX or EDGE
    budget: int
    seed: int = 0
    source: np.ndarray | None = None  # vertex id or edge id per point

    def __len__(self) -> int:
        return len(self.points)

    def save(self, path) -> None:
        """Binary records ``<f4 x, y, z, u1 tag>`` plus a ``.json`` sidecar."""
        rec = np.zeros(len(self.points), dtype=[("xyz", "<f4", 3), ("tag", "u1")])
        rec["xyz"] = self.points
        rec["tag"] = self.tags
        rec.tofile(path)
        with open(f"{path}.json", "w") as fh:
            json.dump({"count": len(self.points), "budget": self.budget, "seed": self.seed,
                       "record": "<f4 x, <f4 y, <f4 z, u1 tag (0=vertex, 1=edge)"}, fh)

    @classmethod
    def load(cls, path) -> "ConditionCloud":
        with open(f"{path}.json") as fh:
            meta = json.load(fh)
        rec = np.fromfile(path, dtype=[("xyz", "<f4", 3), ("tag", "u1")])
        return cls(rec["xyz"].astype(np.float64), rec["tag"].copy(), meta["budget"], meta["seed"])


def allocate_edge_samples(lengths: np.ndarray, total: int) -> np.ndarray:
    """Per-edge sample counts summing exactly to ``total``.

    ``K_e = max(1, floor(total * len_e / sum(len)))``; leftover samples go one at
    a time to the longest edges first (ties by edge index). If the floor of one
    per edge already overshoots, the most over-allocated edges give samples
    back; only when there are fewer samples than edges do the shortest edges
    end up with none.
    """
    lengths = np.asarray(lengths, dtype=np.float64)
    measure = lengths.sum()
    if not measure > 0.0:
        raise MeshError("total edge length is zero")
    counts = np.maximum(1, np.floor(total * lengths / measure)).astype(np.int64)
    counts[lengths <= 0.0] = 0
    order = np.lexsort((np.arange(len(lengths)), -lengths))  # longest first
    diff = total - int(counts.sum())
    i = 0
    while diff > 0:
        counts[order[i % len(order)]] += 1
        diff -= 1
        i += 1
    if diff < 0 and total >= int(np.sum(lengths > 0.0)):
        # keep one sample per edge; trim the most over-allocated edges first
        excess = counts - total * lengths / measure
        while diff < 0:
            cand = np.flatnonzero(counts > 1)
            e = cand[np.lexsort((cand, -excess[cand]))[0]]
            counts[e] -= 1
            excess[e] -= 1.0
            diff += 1
    for e in order[::-1]:
        if diff >= 0:
            break
        take = min(int(counts[e]), -diff)
        counts[e] -= take
        diff += take
    return counts


def sample_condition(mesh: TriMesh, budget: int = DEFAULT_BUDGET, seed: int = 0,
                     jitter: float = 0.0) -> ConditionCloud:
    """Vertex/edge condition cloud of exactly ``budget`` points.

    ``seed`` only drives the optional Gaussian ``jitter``; with ``jitter=0`` the
    result depends on the mesh and budget alone.
    """
    if budget <= 0 or budget % 2:
        raise ValueError("budget must be a positive even integer")
    if mesh.n_vertices == 0 or len(mesh.edges) == 0:
        raise MeshError("mesh needs at least one vertex and one edge")
    half = budget // 2
    vid = np.arange(half) % mesh.n_vertices
    vpts = mesh.vertices[vid]

    lengths = mesh.edge_lengths()
    counts = allocate_edge_samples(lengths, half)
    eid = np.repeat(np.arange(len(counts)), counts)
    # local sample index k within each edge
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    k = np.arange(half) - np.repeat(starts, counts)
    t = (k + 0.5) / counts[eid]
    a = mesh.vertices[mesh.edges[eid, 0]]
    b = mesh.vertices[mesh.edges[eid, 1]]
    epts = a + t[:, None] * (b - a)

    points = np.concatenate([vpts, epts])
    if jitter > 0.0:
        rng = np.random.default_rng(seed)
        points = points + rng.normal(scale=jitter, size=points.shape)
    tags = np.concatenate([np.full(half, VERTEX, np.uint8), np.full(half, EDGE, np.uint8)])
    return ConditionCloud(points, tags, budget, seed, np.concatenate([vid, eid]))


def sample_uniform_surface(mesh: TriMesh, budget: int, seed: int = 0) -> ConditionCloud:
    """Area-weighted uniform surface samples (the non-aligned baseline sampler)."""
    areas = mesh.face_areas() if mesh.n_faces else np.zeros(0)
    if budget == 0:
        return ConditionCloud(np.zeros((0, 3)), np.zeros(0, np.uint8), 0, seed, np.zeros(0, np.int64))
    if not areas.sum() > 0.0:
        raise MeshError("all faces are degenerate")
    rng = np.random.default_rng(seed)
    face = rng.choice(len(areas), size=budget, p=areas / areas.sum())
    r1, r2 = rng.random(budget), rng.random(budget)
    s = np.sqrt(r1)
    bary = np.stack([1.0 - s, s * (1.0 - r2), s * r2], axis=1)
    tri = mesh.vertices[mesh.faces[face]]
    points = np.einsum("nk,nkd->nd", bary, tri)
    return ConditionCloud(points, np.full(budget, SURFACE, np.uint8), budget, seed, face)
