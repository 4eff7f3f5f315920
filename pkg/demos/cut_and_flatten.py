"""Walk through the geometry pipeline on procedural shapes.

1. Read the seams of a textured cube and turn them into a token stream.
2. Cut the cube along the decoded seam and flatten the resulting chart.
3. Compare two cut placements on the same sphere by conformal energy.

Run with ``python3 demos/cut_and_flatten.py``.
"""

from seamcut import apply_seams, encode, extract_seams, normalize_to_unit_cube, unwrap_cut
from seamcut import shapes
from seamcut.cutting import cut_along_edges
from seamcut.mesh import EdgeKey, topology

cube = shapes.cross_cube()
edges, seam = extract_seams(cube)
tokens = encode(seam)
print(f"cube: {len(edges.edges)} seam edges, {len(edges.islands)} UV island(s), {len(tokens)} tokens")

# The codec works in the normalized frame, so cut the normalized mesh.
norm, _ = normalize_to_unit_cube(cube)
cut = apply_seams(norm, seam)
chart, _ = cut.chart_mesh(0)
print(f"cut: {len(cut.charts)} chart(s), disk = {topology(chart).is_disk}, "
      f"{cut.report.duplicated_vertices} vertices duplicated")
atlas = unwrap_cut(cut.cut_mesh, cut.charts)
print(f"flattened cube: mean conformal energy {atlas.mean_energy:.2e}")

n_lon, n_lat = 24, 12
sphere = shapes.uv_sphere(n_lon, n_lat)
for name, ring in [("equator loop", shapes.sphere_ring_edges(n_lon, n_lat, n_lat // 2)),
                   ("single meridian slit", shapes.sphere_meridian_edges(n_lon, n_lat))]:
    res = cut_along_edges(sphere, {EdgeKey.of(*e) for e in ring})
    energy = unwrap_cut(res.cut_mesh, res.charts).mean_energy
    print(f"sphere, {name}: {len(res.charts)} chart(s), mean conformal energy {energy:.4f}")
