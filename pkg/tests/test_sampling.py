import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seamcut import shapes
from seamcut.mesh import MeshError, TriMesh
from seamcut.sampling import (EDGE, PAPER_BUDGET, VERTEX, ConditionCloud, allocate_edge_samples,
                              sample_condition, sample_uniform_surface)


def random_mesh(rng):
    kind = rng.integers(3)
    if kind == 0:
        m = shapes.grid(int(rng.integers(2, 7)), int(rng.integers(2, 7)))
    elif kind == 1:
        m = shapes.uv_sphere(int(rng.integers(4, 10)), int(rng.integers(3, 7)))
    else:
        m = shapes.cylinder(int(rng.integers(3, 9)), int(rng.integers(2, 5)))
    return m.with_vertices(m.vertices + rng.normal(scale=0.02, size=m.vertices.shape))


def point_segment_distance(p, a, b):
    d = b - a
    t = np.clip(np.einsum("ij,ij->i", p - a, d) / np.einsum("ij,ij->i", d, d), 0, 1)
    return np.linalg.norm(a + t[:, None] * d - p, axis=1)


def test_contract_on_100_random_meshes():
    rng = np.random.default_rng(0)
    for _ in range(100):
        m = random_mesh(rng)
        budget = int(rng.integers(1, 400)) * 2
        c = sample_condition(m, budget)
        assert len(c) == budget
        assert np.sum(c.tags == VERTEX) == np.sum(c.tags == EDGE) == budget // 2
        v = c.tags == VERTEX
        assert np.array_equal(c.points[v], m.vertices[c.source[v]])
        e = m.edges[c.source[~v]]
        d = point_segment_distance(c.points[~v], m.vertices[e[:, 0]], m.vertices[e[:, 1]])
        assert d.max() <= 1e-9
        again = sample_condition(m, budget)
        assert np.array_equal(again.points, c.points) and np.array_equal(again.tags, c.tags)


def test_vertices_cycle_round_robin():
    m = shapes.tetrahedron()
    c = sample_condition(m, 20)
    assert c.source[:10].tolist() == [0, 1, 2, 3, 0, 1, 2, 3, 0, 1]


def test_edge_samples_sit_at_cell_midpoints():
    m = TriMesh(np.array([[0.0, 0, 0], [3.0, 0, 0], [0, 1.0, 0]]), [[0, 1, 2]])
    c = sample_condition(m, 20)
    e = c.source[c.tags == EDGE]
    p = c.points[c.tags == EDGE]
    for k in np.unique(e):
        a, b = m.vertices[m.edges[k]]
        t = np.sort(np.linalg.norm(p[e == k] - a, axis=1) / np.linalg.norm(b - a))
        n = len(t)
        assert np.allclose(t, (np.arange(n) + 0.5) / n)


def test_full_budget():
    c = sample_condition(shapes.uv_sphere(32, 16), PAPER_BUDGET)
    assert len(c) == 61_440 and np.sum(c.tags == EDGE) == 30_720


def test_allocation_examples():
    assert allocate_edge_samples(np.array([2.0, 1.0]), 9).tolist() == [6, 3]
    assert allocate_edge_samples(np.array([1.0, 1.0, 1.0]), 4).tolist() == [2, 1, 1]
    # more edges than samples: shortest edges give theirs back
    counts = allocate_edge_samples(np.array([5.0, 1.0, 2.0, 3.0]), 2)
    assert counts.tolist() == [1, 0, 0, 1]


def allocation_oracle(lengths, total):
    """Floor shares (at least one each), trimmed or topped up one sample at a time."""
    base = [max(1, int(total * l // sum(lengths))) for l in lengths]
    order = sorted(range(len(lengths)), key=lambda i: (-lengths[i], i))
    while sum(base) > total:
        over = [i for i in range(len(base)) if base[i] > 1]
        j = min(over, key=lambda i: (-(base[i] - total * lengths[i] / sum(lengths)), i))
        base[j] -= 1
    i = 0
    while sum(base) < total:
        base[order[i % len(order)]] += 1
        i += 1
    return base


@settings(max_examples=300, deadline=None)
@given(st.lists(st.integers(1, 50), min_size=1, max_size=30), st.integers(0, 400))
def test_property_allocation(lengths, extra):
    total = len(lengths) + extra
    got = allocate_edge_samples(np.array(lengths, dtype=float), total)
    assert got.sum() == total and got.min() >= 1
    assert got.tolist() == allocation_oracle([float(x) for x in lengths], total)


def test_invalid_budget_and_mesh():
    with pytest.raises(ValueError):
        sample_condition(shapes.tetrahedron(), 7)
    with pytest.raises(MeshError):
        allocate_edge_samples(np.zeros(3), 4)


def test_jitter_is_seeded():
    m = shapes.uv_sphere(8, 5)
    a = sample_condition(m, 64, seed=3, jitter=0.01)
    b = sample_condition(m, 64, seed=3, jitter=0.01)
    c = sample_condition(m, 64, seed=4, jitter=0.01)
    assert np.array_equal(a.points, b.points) and not np.array_equal(a.points, c.points)


def test_cloud_file_round_trip(tmp_path):
    c = sample_condition(shapes.uv_sphere(8, 5), 128)
    c.save(tmp_path / "c.bin")
    back = ConditionCloud.load(tmp_path / "c.bin")
    assert np.allclose(back.points, c.points, atol=1e-6)
    assert np.array_equal(back.tags, c.tags) and back.budget == 128
    assert (tmp_path / "c.bin").stat().st_size == 128 * 13


def test_uniform_surface_points_lie_on_faces():
    m = shapes.grid(4, 4)
    c = sample_uniform_surface(m, 500, seed=1)
    assert np.allclose(c.points[:, 2], 0) and c.points[:, :2].min() >= 0 and c.points[:, :2].max() <= 1
