import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seamcut import shapes
from seamcut.cutting import cut_along_edges
from seamcut.flatten import (ConvergenceError, FlattenError, NonDiskChartError, conformal_energy,
                             flatten_chart, local_frames, pack_charts, pcg, singular_values_2x2,
                             unwrap_cut)
from seamcut.mesh import EdgeKey, TriMesh
from scipy import sparse


def planar_uv(mesh):
    return mesh.vertices[:, :2].copy()


def lstsq_energy(mesh, uv):
    """Independent metric: fit the 2x3 Jacobian by least squares, SVD it in 3D."""
    out = []
    for tri, t2 in zip(mesh.vertices[mesh.faces], uv[mesh.faces]):
        E = np.stack([tri[1] - tri[0], tri[2] - tri[0]])  # 2 x 3
        U = np.stack([t2[1] - t2[0], t2[2] - t2[0]])  # 2 x 2
        J = np.linalg.lstsq(E, U, rcond=None)[0].T  # 2 x 3, min-norm (acts on the face plane)
        s = np.linalg.svd(J, compute_uv=False)
        out.append(abs(math.log(s[0])) + abs(math.log(s[1])))
    return np.array(out)


def test_identity_scale_anisotropic():
    g = shapes.grid(6, 5)
    uv = planar_uv(g)
    assert np.abs(conformal_energy(g, uv).energy).max() <= 1e-12
    e = conformal_energy(g, 2 * uv).energy
    assert np.abs(e - 2 * math.log(2)).max() <= 1e-12
    e = conformal_energy(g, uv * [2.0, 1.0]).energy
    assert np.abs(e - math.log(2)).max() <= 1e-12


def test_metric_matches_lstsq_jacobian():
    rng = np.random.default_rng(0)
    s = shapes.uv_sphere(10, 6)
    uv = rng.uniform(size=(s.n_vertices, 2))
    rep = conformal_energy(s, uv)
    ok = ~np.isnan(rep.energy)
    assert np.abs(rep.energy[ok] - lstsq_energy(s, uv)[ok]).max() <= 1e-9
    assert np.all(rep.sigma[ok, 0] >= rep.sigma[ok, 1]) and np.all(rep.sigma[ok, 1] >= 0)


def test_closed_form_singular_values():
    J = np.random.default_rng(1).normal(size=(500, 2, 2))
    assert np.allclose(singular_values_2x2(J), np.linalg.svd(J, compute_uv=False), atol=1e-12)


def test_corner_uv_form_and_skipped_faces():
    g = shapes.grid(3, 3)
    uv = planar_uv(g)
    a = conformal_energy(g, uv)
    b = conformal_energy(g, uv[g.faces])
    assert np.array_equal(a.energy, b.energy)
    squashed = uv.copy()
    squashed[:, 1] = 0.0
    rep = conformal_energy(g, squashed)
    assert rep.counted == 0 and rep.skipped == g.n_faces and math.isnan(rep.mean)


def test_lscm_planar_patch():
    g = shapes.grid(33, 33)
    uv = flatten_chart(g)
    assert conformal_energy(g, uv).mean <= 1e-6


def test_lscm_single_triangle():
    t = TriMesh(np.array([[0.0, 0, 0], [2.0, 0.3, 0.1], [0.4, 1.5, -0.2]]), [[0, 1, 2]])
    assert conformal_energy(t, flatten_chart(t)).mean <= 1e-9


def test_lscm_open_cylinder_chart():
    n, m = 32, 16
    cyl = shapes.cylinder(n, m, radius=1.0, height=2.0)
    res = cut_along_edges(cyl, {EdgeKey.of(*e) for e in shapes.cylinder_seam_edges(n, m)})
    atlas = unwrap_cut(res.cut_mesh, res.charts)
    assert atlas.mean_energy <= 0.05


def test_pins_are_honored_and_rotation_equivariant():
    g = shapes.grid(8, 6)
    rng = np.random.default_rng(2)
    bumpy = g.with_vertices(g.vertices + [0, 0, 1] * rng.uniform(0, 0.2, size=(g.n_vertices, 1)))
    pins = (0, g.n_vertices - 1)
    a = flatten_chart(bumpy, pins=pins, normalize_area=False)
    assert np.allclose(a[list(pins)], [[0, 0], [1, 0]], atol=1e-12)
    th = 0.7
    R = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    b = flatten_chart(bumpy, pins=pins, pin_uv=((0, 0), tuple(R @ [1, 0])))
    a = flatten_chart(bumpy, pins=pins)
    assert np.allclose(b, a @ R.T, atol=1e-7)
    assert abs(conformal_energy(bumpy, a).mean - conformal_energy(bumpy, b).mean) <= 1e-9


def test_area_normalization_matches_surface_area():
    s = shapes.cylinder(12, 4)
    res = cut_along_edges(s, {EdgeKey.of(*e) for e in shapes.cylinder_seam_edges(12, 4)})
    uv = flatten_chart(res.cut_mesh)
    tri = uv[res.cut_mesh.faces]
    d1, d2 = tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]
    uv_area = 0.5 * np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]).sum()
    assert math.isclose(uv_area, res.cut_mesh.face_areas().sum(), rel_tol=1e-9)


def test_z_squared_map_is_conformal():
    g = shapes.grid(65, 65)
    z = (g.vertices[:, 0] + 1.0) + 1j * (g.vertices[:, 1] + 0.5)  # keep away from 0
    w = z * z
    rep = conformal_energy(g, np.stack([w.real, w.imag], 1))
    ratio = rep.sigma[:, 0] / rep.sigma[:, 1]
    assert np.abs(ratio - 1).max() <= 0.02


def test_equator_beats_slit_on_sphere():
    n_lon, n_lat = 24, 12
    s = shapes.uv_sphere(n_lon, n_lat)
    equator = {EdgeKey.of(*e) for e in shapes.sphere_ring_edges(n_lon, n_lat, n_lat // 2)}
    slit = {EdgeKey.of(*e) for e in shapes.sphere_meridian_edges(n_lon, n_lat)}
    e_eq = unwrap_cut(*_cut(s, equator)).mean_energy
    e_slit = unwrap_cut(*_cut(s, slit)).mean_energy
    assert e_eq < e_slit


def _cut(mesh, edges):
    r = cut_along_edges(mesh, edges)
    return r.cut_mesh, r.charts


def test_non_disk_chart_errors():
    with pytest.raises(NonDiskChartError) as err:
        flatten_chart(shapes.uv_sphere(8, 5))
    assert err.value.boundary_loops == 0 and err.value.euler == 2
    with pytest.raises(NonDiskChartError):
        flatten_chart(shapes.cylinder(8, 3))
    atlas = unwrap_cut(shapes.uv_sphere(8, 5), [list(range(shapes.uv_sphere(8, 5).n_faces))], strict=False)
    assert list(atlas.failed_charts) == [0]


def test_zero_area_face_rejected():
    v = np.array([[0.0, 0, 0], [1, 0, 0], [2, 0, 0], [0, 1, 0]])
    with pytest.raises(FlattenError):
        flatten_chart(TriMesh(v, [[0, 1, 2], [0, 1, 3]]))


def test_pcg_solves_spd_and_reports_non_convergence():
    rng = np.random.default_rng(3)
    M = rng.normal(size=(30, 30))
    A = M @ M.T + 30 * np.eye(30)
    b = rng.normal(size=30)
    x, info = pcg(lambda y: A @ y, b, np.diag(A))
    assert np.linalg.norm(A @ x - b) <= 1e-10 * np.linalg.norm(b) and info.iterations <= 30
    with pytest.raises(ConvergenceError) as err:
        pcg(lambda y: A @ y, b, np.diag(A), maxiter=2)
    assert err.value.iterations == 2 and err.value.residual > 1e-10


def test_local_frames_preserve_lengths():
    s = shapes.uv_sphere(8, 5)
    q, area = local_frames(s)
    p = s.vertices[s.faces]
    for i, j in ((0, 1), (1, 2), (0, 2)):
        assert np.allclose(np.linalg.norm(q[:, i] - q[:, j], axis=1), np.linalg.norm(p[:, i] - p[:, j], axis=1))
    assert np.allclose(area, s.face_areas())


def bbox_overlap(a, b):
    return np.all(np.maximum(a.min(0), b.min(0)) < np.minimum(a.max(0), b.max(0)))


@pytest.mark.parametrize("n", [2, 4, 8, 16])
def test_packing_utilization(n):
    square = np.array([[0.0, 0], [1, 0], [1, 1], [0, 1]])
    packed, place = pack_charts([square] * n)
    used = sum(np.prod(p.max(0) - p.min(0)) for p in packed)
    assert used >= 0.40
    for p in packed:
        assert p.min() >= 0 and p.max() <= 1
    assert not any(bbox_overlap(packed[i], packed[j]) for i in range(n) for j in range(i + 1, n))


def test_two_squares_side_by_side():
    square = np.array([[0.0, 0], [1, 0], [1, 1], [0, 1]])
    packed, place = pack_charts([square, square])
    assert place.scale <= 0.5 - 2 / 1024
    assert np.isclose(packed[0][:, 1].min(), packed[1][:, 1].min())


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(0.01, 10), st.floats(0.01, 10)), min_size=1, max_size=12))
def test_property_packing_fits_without_overlap(dims):
    rects = [np.array([[0, 0], [w, 0], [w, h], [0, h]]) for w, h in dims]
    packed, _ = pack_charts(rects)
    for p in packed:
        assert p.min() >= 0 and p.max() <= 1
    assert not any(bbox_overlap(packed[i], packed[j]) for i in range(len(packed)) for j in range(i + 1, len(packed)))


@settings(max_examples=40, deadline=None)
@given(st.floats(1.0, 50.0))
def test_property_uniform_scale_adds_2_ln_s(s):
    g = shapes.grid(4, 4)
    uv = planar_uv(g) * 1.5
    base = conformal_energy(g, uv).energy
    assert np.allclose(conformal_energy(g, s * uv).energy - base, 2 * math.log(s), atol=1e-9)
