"""Procedural test meshes. The vertical axis is ``y`` throughout."""

from __future__ import annotations

import numpy as np

from .mesh import TriMesh


def grid(nx: int, ny: int, size=(1.0, 1.0)) -> TriMesh:
    """Flat ``nx`` x ``ny`` vertex grid in the ``z = 0`` plane."""
    xs = np.linspace(0.0, size[0], nx)
    ys = np.linspace(0.0, size[1], ny)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    verts = np.stack([X.ravel(), Y.ravel(), np.zeros(X.size)], axis=1)
    faces = []
    for j in range(ny - 1):
        for i in range(nx - 1):
            a = j * nx + i
            b, c, d = a + 1, a + nx + 1, a + nx
            faces += [(a, b, c), (a, c, d)]
    return TriMesh(verts, np.array(faces))


def tetrahedron() -> TriMesh:
    v = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
    f = np.array([[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]])
    return TriMesh(v, f)


def bowtie() -> TriMesh:
    """Two triangles sharing only vertex 0."""
    v = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [-1, 0, 0], [-1, -1, 0]], dtype=float)
    return TriMesh(v, np.array([[0, 1, 2], [0, 3, 4]]))


def cylinder(n_around: int = 32, n_height: int = 16, radius: float = 1.0,
             height: float = 2.0, caps: bool = False) -> TriMesh:
    """Tube around the ``y`` axis with ``n_height + 1`` rings; optional fan caps."""
    theta = 2 * np.pi * np.arange(n_around) / n_around
    ys = np.linspace(-height / 2, height / 2, n_height + 1)
    verts = [[radius * np.cos(t), y, -radius * np.sin(t)] for y in ys for t in theta]
    faces = []
    for j in range(n_height):
        for i in range(n_around):
            a = j * n_around + i
            b = j * n_around + (i + 1) % n_around
            c, d = b + n_around, a + n_around
            faces += [(a, b, c), (a, c, d)]
    if caps:
        bottom = len(verts)
        verts.append([0.0, ys[0], 0.0])
        top = len(verts)
        verts.append([0.0, ys[-1], 0.0])
        last = n_height * n_around
        for i in range(n_around):
            i2 = (i + 1) % n_around
            faces.append((bottom, i2, i))
            faces.append((top, last + i, last + i2))
    return TriMesh(np.array(verts), np.array(faces))


def cylinder_seam_edges(n_around: int, n_height: int, caps: bool = False) -> list[tuple[int, int]]:
    """Vertical line at angle 0, plus the two rim rings when the tube is capped."""
    edges = [(j * n_around, (j + 1) * n_around) for j in range(n_height)]
    if caps:
        for j in (0, n_height):
            edges += [(j * n_around + i, j * n_around + (i + 1) % n_around) for i in range(n_around)]
    return edges


def uv_sphere(n_lon: int = 16, n_lat: int = 8, radius: float = 1.0) -> TriMesh:
    """Latitude/longitude sphere with poles on the ``y`` axis.

    Vertex 0 is the north pole, vertex 1 the south pole, then rings
    ``1 .. n_lat - 1`` from north to south with ``n_lon`` vertices each.
    """
    verts = [[0.0, radius, 0.0], [0.0, -radius, 0.0]]
    for j in range(1, n_lat):
        phi = np.pi * j / n_lat
        for i in range(n_lon):
            t = 2 * np.pi * i / n_lon
            verts.append([radius * np.sin(phi) * np.cos(t), radius * np.cos(phi),
                          -radius * np.sin(phi) * np.sin(t)])

    def ring(j, i):
        return 2 + (j - 1) * n_lon + i % n_lon

    faces = []
    for i in range(n_lon):
        faces.append((0, ring(1, i), ring(1, i + 1)))
        faces.append((1, ring(n_lat - 1, i + 1), ring(n_lat - 1, i)))
    for j in range(1, n_lat - 1):
        for i in range(n_lon):
            a, b = ring(j, i), ring(j, i + 1)
            c, d = ring(j + 1, i + 1), ring(j + 1, i)
            faces += [(a, d, c), (a, c, b)]
    return TriMesh(np.array(verts), np.array(faces))


def sphere_ring_edges(n_lon: int, n_lat: int, j: int) -> list[tuple[int, int]]:
    base = 2 + (j - 1) * n_lon
    return [(base + i, base + (i + 1) % n_lon) for i in range(n_lon)]


def sphere_meridian_edges(n_lon: int, n_lat: int, lon: int = 0) -> list[tuple[int, int]]:
    path = [0] + [2 + (j - 1) * n_lon + lon for j in range(1, n_lat)] + [1]
    return list(zip(path[:-1], path[1:]))


def sphere_seam_edges(n_lon: int, n_lat: int, pole_rings: bool = True) -> list[tuple[int, int]]:
    edges = sphere_meridian_edges(n_lon, n_lat)
    if pole_rings:
        edges += sphere_ring_edges(n_lon, n_lat, 1) + sphere_ring_edges(n_lon, n_lat, n_lat - 1)
    return edges


# Cube sides as (axis, value) on the lattice [0, k]^3; value is 0 or k.
_SIDES = {
    "front": (2, 1), "back": (2, 0),
    "top": (1, 1), "bottom": (1, 0),
    "right": (0, 1), "left": (0, 0),
}
# Cross net: front in the middle, top above, bottom below it, back below bottom,
# left/right beside front. Fold edges keep these pairs attached.
CROSS_FOLDS = {("front", "top"), ("front", "bottom"), ("front", "left"),
               ("front", "right"), ("bottom", "back")}


def _cross_uv(side: str, p: np.ndarray) -> np.ndarray:
    """Unfold lattice point ``p`` (unit cube coordinates) of ``side`` onto the net."""
    x, y, z = p
    if side == "front":
        return np.array([1 + x, 2 + y])
    if side == "top":
        return np.array([1 + x, 3 + (1 - z)])
    if side == "bottom":
        return np.array([1 + x, 1 + z])
    if side == "back":
        return np.array([1 + x, 1 - y])
    if side == "left":
        return np.array([z, 2 + y])
    return np.array([3 - z, 2 + y])


def box(k: int = 1, dims=(1.0, 1.0, 1.0), with_uv: bool = False) -> TriMesh:
    """Closed box with every side subdivided into ``k`` x ``k`` quads (2 triangles each).

    With ``with_uv`` each corner gets cross-net coordinates in ``[0, 0.75] x [0, 1]``.
    """
    index: dict[tuple[int, int, int], int] = {}
    verts, faces, uvs = [], [], []

    def vid(p):
        key = tuple(int(c) for c in p)
        if key not in index:
            index[key] = len(verts)
            verts.append(key)
        return index[key]

    for side, (axis, hi) in _SIDES.items():
        u_axis, v_axis = [a for a in range(3) if a != axis]
        value = k * hi
        for a in range(k):
            for b in range(k):
                quad = []
                for du, dv in ((0, 0), (1, 0), (1, 1), (0, 1)):
                    p = [0, 0, 0]
                    p[axis], p[u_axis], p[v_axis] = value, a + du, b + dv
                    quad.append(p)
                # outward winding: (u, v, axis) right-handed on hi sides
                flip = (hi == 1) != ((u_axis, v_axis, axis) in ((0, 1, 2), (1, 2, 0), (2, 0, 1)))
                if flip:
                    quad = quad[::-1]
                ids = [vid(p) for p in quad]
                for tri in ((0, 1, 2), (0, 2, 3)):
                    faces.append([ids[t] for t in tri])
                    if with_uv:
                        uvs.append([_cross_uv(side, np.array(quad[t]) / k) / 4.0 for t in tri])
    v = np.array(verts, dtype=np.float64) / k * np.asarray(dims, dtype=np.float64)
    return TriMesh(v, np.array(faces), np.array(uvs) if with_uv else None)


def _cube_edge_points(k: int, s1: str, s2: str) -> list[tuple[int, int, int]]:
    (a1, h1), (a2, h2) = _SIDES[s1], _SIDES[s2]
    free = ({0, 1, 2} - {a1, a2}).pop()
    pts = []
    for t in range(k + 1):
        p = [0, 0, 0]
        p[a1], p[a2], p[free] = k * h1, k * h2, t
        pts.append(tuple(p))
    return pts


def box_seam_edges(k: int) -> list[tuple[int, int]]:
    """The 7 cube edges left open by the cross net, as mesh edges of ``box(k)``."""
    mesh_index = {tuple(p): i for i, p in enumerate(
        np.rint(box(k).vertices * k).astype(int).tolist())}
    names = list(_SIDES)
    out = []
    for i, s1 in enumerate(names):
        for s2 in names[i + 1:]:
            if _SIDES[s1][0] == _SIDES[s2][0]:
                continue
            if (s1, s2) in CROSS_FOLDS or (s2, s1) in CROSS_FOLDS:
                continue
            pts = _cube_edge_points(k, s1, s2)
            out += [(mesh_index[p], mesh_index[q]) for p, q in zip(pts[:-1], pts[1:])]
    return out


def cross_cube() -> TriMesh:
    """Unit cube, 8 vertices / 12 triangles, UV-unwrapped as a cross."""
    return box(1, with_uv=True)
