"""Procedural training shapes with known good seams.

Three families, cycled in order: subdivided boxes cut along the seven open
edges of a cross net, capped cylinders cut by one vertical line plus both rim
rings, and latitude/longitude spheres cut along one meridian plus the rings
around each pole. Every sample is normalized to ``[-1, 1]^3`` and kept only
if its segment-to-vertex ratio lies inside the advisory range.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import shapes
from ..codec import SeamSequence, seam_from_edges
from ..mesh import TriMesh, normalize_to_unit_cube
from .config import ADVISORY_RATIO

FAMILIES = ("box", "cylinder", "sphere")


@dataclass
class SyntheticShape:
    family: str
    mesh: TriMesh
    seam: SeamSequence
    seam_edges: list[tuple[int, int]]
    params: dict

    @property
    def ratio(self) -> float:
        return self.seam.n_segments / self.mesh.n_vertices


def _draw(family: str, rng: np.random.Generator):
    if family == "box":
        k = int(rng.integers(4, 7))
        dims = rng.uniform(0.6, 1.4, size=3)
        params = {"k": k, "dims": dims.round(6).tolist()}
        return shapes.box(k, dims), shapes.box_seam_edges(k), params
    if family == "cylinder":
        n, m = int(rng.integers(10, 15)), int(rng.integers(5, 11))
        params = {"n_around": n, "n_height": m, "radius": float(rng.uniform(0.4, 1.0)),
                  "height": float(rng.uniform(0.8, 2.0))}
        mesh = shapes.cylinder(n, m, params["radius"], params["height"], caps=True)
        return mesh, shapes.cylinder_seam_edges(n, m, caps=True), params
    n_lon, n_lat = int(rng.integers(10, 15)), int(rng.integers(8, 13))
    params = {"n_lon": n_lon, "n_lat": n_lat, "radius": 1.0}
    return shapes.uv_sphere(n_lon, n_lat), shapes.sphere_seam_edges(n_lon, n_lat), params


def make_shape(family: str, rng: np.random.Generator, max_tries: int = 1000) -> SyntheticShape:
    lo, hi = ADVISORY_RATIO
    for _ in range(max_tries):
        mesh, edges, params = _draw(family, rng)
        mesh, _ = normalize_to_unit_cube(mesh)
        seam = seam_from_edges(mesh.vertices, edges)
        if lo <= seam.n_segments / mesh.n_vertices <= hi:
            return SyntheticShape(family, mesh, seam, edges, params)
    raise RuntimeError(f"could not draw a {family} within the advisory ratio")


def make_synthetic_dataset(n: int, seed: int = 0, families=FAMILIES) -> list[SyntheticShape]:
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    return [make_shape(families[i % len(families)], rng) for i in range(n)]
