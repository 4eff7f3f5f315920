import numpy as np
import pytest

from seamcut import shapes
from seamcut.codec import encode
from seamcut.extract import (SeamEdgeSet, extract_seams, seam_edge_keys, triangles_overlap,
                             uv_islands, validate_uv_layout)
from seamcut.mesh import EdgeKey, MeshError, TriMesh


def as_keys(edges):
    return {EdgeKey.of(a, b) for a, b in edges}


def test_cross_cube_has_seven_seam_edges_and_one_island():
    cube = shapes.cross_cube()
    edges, seq = extract_seams(cube)
    assert len(edges.edges) == 7
    assert edges.edges == as_keys(shapes.box_seam_edges(1))
    assert len(edges.islands) == 1 and sorted(edges.islands[0]) == list(range(12))
    assert seq.n_segments == 7
    assert len(encode(seq)) == 44


@pytest.mark.parametrize("k", [2, 3])
def test_subdivided_box_seams(k):
    edges, _ = extract_seams(shapes.box(k, with_uv=True))
    assert edges.edges == as_keys(shapes.box_seam_edges(k))


def test_islands_agree_with_welded_corner_oracle():
    rng = np.random.default_rng(0)
    for mesh in (shapes.cross_cube(), shapes.box(2, with_uv=True)):
        edges, _ = extract_seams(mesh)
        assert sorted(map(sorted, edges.islands)) == sorted(map(sorted, uv_islands(mesh)))
    # every face its own island
    g = shapes.grid(4, 4)
    uv = rng.uniform(size=(g.n_faces, 3, 2))
    m = TriMesh(g.vertices, g.faces, uv)
    edges, _ = extract_seams(m)
    interior = {EdgeKey.of(*e) for e, c in zip(m.edges.tolist(), m.edge_face_count) if c == 2}
    assert edges.edges == interior
    assert len(edges.islands) == m.n_faces == len(uv_islands(m))


def test_tolerance_welds_nearby_uvs():
    g = shapes.grid(3, 2)
    uv = g.vertices[g.faces][..., :2].copy()
    uv[0, 0] += 5e-8
    assert not seam_edge_keys(TriMesh(g.vertices, g.faces, uv))
    uv[0, 0] += 1e-6
    assert seam_edge_keys(TriMesh(g.vertices, g.faces, uv))


def test_requires_uvs():
    with pytest.raises(MeshError):
        extract_seams(shapes.box(1))


def test_edge_set_json_round_trip(tmp_path):
    edges, _ = extract_seams(shapes.cross_cube())
    edges.save(tmp_path / "e.json")
    import json
    back = SeamEdgeSet.from_json(json.loads((tmp_path / "e.json").read_text()))
    assert back.edges == edges.edges and back.islands == edges.islands


def test_valid_cross_layout():
    rep = validate_uv_layout(shapes.cross_cube())
    assert rep.ok, rep.to_json()


def test_layout_flags_flip_degenerate_overlap():
    g = shapes.grid(3, 3)
    uv = g.vertices[g.faces][..., :2].copy()
    bad = uv.copy()
    bad[0] = bad[0][::-1]
    assert validate_uv_layout(TriMesh(g.vertices, g.faces, bad)).flipped_faces == [0]
    bad = uv.copy()
    bad[1] = [[0, 0], [1, 1], [2, 2]]
    assert 1 in validate_uv_layout(TriMesh(g.vertices, g.faces, bad)).degenerate_faces
    # two islands stacked on top of each other
    two = TriMesh(np.vstack([g.vertices, g.vertices + [0, 0, 1]]), np.vstack([g.faces, g.faces + 9]),
                  np.concatenate([uv, uv]))
    rep = validate_uv_layout(two)
    assert (0, g.n_faces) in rep.overlapping_pairs and not rep.flipped_faces


def test_layout_flags_non_disk_island():
    cyl = shapes.cylinder(8, 3)
    ang = np.arctan2(cyl.vertices[:, 2], cyl.vertices[:, 0])
    uv = np.stack([np.cos(ang) * (1 + cyl.vertices[:, 1]), np.sin(ang) * (1 + cyl.vertices[:, 1])], 1)
    rep = validate_uv_layout(TriMesh(cyl.vertices, cyl.faces, uv[cyl.faces]))
    assert rep.non_disk_islands == [0]


def inside(tri, p):
    d = [(tri[(i + 1) % 3, 0] - tri[i, 0]) * (p[:, 1] - tri[i, 1])
         - (tri[(i + 1) % 3, 1] - tri[i, 1]) * (p[:, 0] - tri[i, 0]) for i in range(3)]
    d = np.stack(d, 1)
    return np.all(d > 1e-12, 1) | np.all(d < -1e-12, 1)


def test_overlap_against_sampling_oracle():
    rng = np.random.default_rng(1)
    pts = rng.uniform(-1, 2, size=(20000, 2))
    for _ in range(300):
        t1, t2 = rng.uniform(0, 1, size=(2, 3, 2))
        common = np.any(inside(t1, pts) & inside(t2, pts))
        if common:
            assert triangles_overlap(t1, t2)


def test_touching_triangles_do_not_overlap():
    a = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    b = np.array([[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    c = np.array([[1.0, 0.0], [2.0, 0.0], [1.0, 1.0]])
    assert not triangles_overlap(a, b)
    assert not triangles_overlap(a, c)
    assert triangles_overlap(a, a + 0.1)
