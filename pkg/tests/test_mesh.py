from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seamcut import shapes
from seamcut.mesh import (EdgeKey, EmptyMeshError, MeshError, ObjParseError, TriMesh, boundary_loops,
                          face_components, load_obj, normalize_to_unit_cube, save_obj, topology,
                          vertex_adjacency)


def edge_oracle(faces):
    """Undirected edge -> incidence count, by direct enumeration."""
    c = Counter()
    for tri in faces.tolist():
        for i in range(3):
            a, b = tri[i], tri[(i + 1) % 3]
            c[(min(a, b), max(a, b))] += 1
    return c


MESHES = {
    "grid": lambda: shapes.grid(4, 3),
    "tet": shapes.tetrahedron,
    "cylinder": lambda: shapes.cylinder(8, 3),
    "capped": lambda: shapes.cylinder(8, 3, caps=True),
    "sphere": lambda: shapes.uv_sphere(10, 6),
    "box": lambda: shapes.box(2),
}

EXPECTED = {  # (chi, boundary loops, genus)
    "grid": (1, 1, 0), "tet": (2, 0, 0), "cylinder": (0, 2, 0), "capped": (2, 0, 0),
    "sphere": (2, 0, 0), "box": (2, 0, 0),
}


@pytest.mark.parametrize("name", sorted(MESHES))
def test_edges_and_euler_match_oracle(name):
    m = MESHES[name]()
    oracle = edge_oracle(m.faces)
    assert {tuple(e) for e in m.edges.tolist()} == set(oracle)
    assert sorted(m.edge_face_count.tolist()) == sorted(oracle.values())
    bnd = {tuple(sorted(e)) for e in m.boundary_edges().tolist()}
    assert bnd == {e for e, n in oracle.items() if n == 1}
    assert m.euler_characteristic() == m.n_vertices - len(oracle) + m.n_faces
    t = topology(m)
    assert (t.euler_characteristic, t.n_boundary_loops, t.genus) == EXPECTED[name]
    assert t.manifold and t.n_components == 1
    assert t.is_disk == (name == "grid")


def test_face_edges_are_consistent():
    m = shapes.uv_sphere(8, 5)
    for f, tri in enumerate(m.faces):
        for j in range(3):
            e = m.face_edges[f, j]
            assert set(m.edges[e]) == {tri[j], tri[(j + 1) % 3]} or set(m.edges[e]) <= set(tri)
            assert f in m.edge_faces[e]


def test_bowtie_is_not_manifold():
    m = shapes.bowtie()
    t = topology(m)
    assert not t.manifold
    stars = vertex_adjacency(m)
    assert sum(not s.manifold for s in stars) == 1


def test_single_triangle_star_is_manifold():
    m = TriMesh(np.eye(3), [[0, 1, 2]])
    assert all(s.manifold and s.boundary for s in vertex_adjacency(m))


def test_grid_boundary_loop_covers_rim():
    m = shapes.grid(3, 3)
    loops = boundary_loops(m)
    assert len(loops) == 1 and len(loops[0]) == 8


def test_components_with_blocked_edges():
    m = shapes.grid(3, 2)
    assert len(face_components(m)) == 1
    shared = {EdgeKey.of(*e) for e, n in edge_oracle(m.faces).items() if n == 2}
    assert len(face_components(m, shared)) == m.n_faces


def test_mesh_validation():
    with pytest.raises(MeshError):
        TriMesh(np.zeros((3, 3)), [[0, 1, 3]])
    with pytest.raises(MeshError):
        TriMesh(np.zeros((3, 3)), [[0, 1, 1]])
    with pytest.raises(MeshError):
        TriMesh(np.zeros((3, 3)), [[0, 1, 2]], np.zeros((2, 3, 2)))


def test_obj_round_trip_with_uv(tmp_path):
    m = shapes.cross_cube()
    save_obj(m, tmp_path / "a.obj")
    back = load_obj(tmp_path / "a.obj")
    assert np.array_equal(back.faces, m.faces)
    assert np.allclose(back.vertices, m.vertices)
    assert np.allclose(back.uv_corners, m.uv_corners)
    save_obj(back, tmp_path / "b.obj")
    assert (tmp_path / "a.obj").read_bytes() == (tmp_path / "b.obj").read_bytes()


def test_obj_polygons_and_negative_indices(tmp_path):
    p = tmp_path / "q.obj"
    p.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf -4//1 -3//1 -2//1 -1//1  # quad\n")
    m = load_obj(p)
    assert m.faces.tolist() == [[0, 1, 2], [0, 2, 3]]
    assert m.uv_corners is None


@pytest.mark.parametrize("text, line", [
    ("v 0 0\n", 1),
    ("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n", 4),
    ("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2\n", 4),
    ("v 0 0 0\nv 1 0 0\nv x 1 0\n", 3),
    ("v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nf 1/1 2 3/1\n", 5),
])
def test_obj_errors_carry_line_numbers(tmp_path, text, line):
    p = tmp_path / "bad.obj"
    p.write_text(text)
    with pytest.raises(ObjParseError) as err:
        load_obj(p)
    assert err.value.line == line


def test_empty_obj(tmp_path):
    p = tmp_path / "e.obj"
    p.write_text("v 0 0 0\n")
    with pytest.raises(EmptyMeshError):
        load_obj(p)


def test_normalize_to_unit_cube():
    m = shapes.box(1, dims=(4.0, 2.0, 1.0)).with_vertices(shapes.box(1, dims=(4.0, 2.0, 1.0)).vertices + 7)
    n, tf = normalize_to_unit_cube(m)
    assert np.isclose(np.abs(n.vertices).max(), 1.0)
    assert np.isclose(np.ptp(n.vertices[:, 0]), 2.0)
    assert np.allclose(tf.inverse(n.vertices), m.vertices)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.data())
def test_property_euler_of_random_grid_patches(nx, ny, data):
    m = shapes.grid(nx, ny)
    keep = data.draw(st.lists(st.booleans(), min_size=m.n_faces, max_size=m.n_faces))
    ids = [i for i, k in enumerate(keep) if k]
    if not ids:
        return
    sub, _ = m.submesh(ids)
    oracle = edge_oracle(sub.faces)
    assert sub.euler_characteristic() == sub.n_vertices - len(oracle) + sub.n_faces
    assert len(sub.boundary_edges()) == sum(1 for n in oracle.values() if n == 1)
