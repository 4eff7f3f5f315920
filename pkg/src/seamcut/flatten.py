"""Chart flattening (least-squares conformal maps), conformal energy, and atlas packing."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .mesh import TriMesh, boundary_loops, topology

DEGENERATE_AREA = 1e-12
GUTTER = 2.0 / 1024.0


class FlattenError(RuntimeError):
    pass


class NonDiskChartError(FlattenError):
    def __init__(self, message, components, euler, boundary_loops, genus, chart=None):
        self.components = components
        self.euler = euler
        self.boundary_loops = boundary_loops
        self.genus = genus
        self.chart = chart
        super().__init__(f"{message} (components={components}, V-E+F={euler}, "
                         f"boundary loops={boundary_loops}, genus={genus})")


class ConvergenceError(FlattenError):
    def __init__(self, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"CG stopped after {iterations} iterations at relative residual {residual:.3e}")


@dataclass
class SolveInfo:
    iterations: int
    residual: float


def pcg(matvec, b: np.ndarray, diag: np.ndarray, rtol: float = 1e-10,
        maxiter: int = 10_000, x0: np.ndarray | None = None) -> tuple[np.ndarray, SolveInfo]:
    """Jacobi-preconditioned conjugate gradient for SPD systems.

    Stops when ``||b - A x|| <= rtol * ||b||``; raises :class:`ConvergenceError`
    after ``maxiter`` iterations otherwise.
    """
    x = np.zeros_like(b) if x0 is None else x0.copy()
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b), SolveInfo(0, 0.0)
    inv_diag = np.where(diag > 0, 1.0 / np.where(diag > 0, diag, 1.0), 1.0)
    r = b - matvec(x)
    z = inv_diag * r
    p = z.copy()
    rz = r @ z
    res = np.linalg.norm(r) / bnorm
    for it in range(1, maxiter + 1):
        if res <= rtol:
            return x, SolveInfo(it - 1, res)
        Ap = matvec(p)
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        res = np.linalg.norm(r) / bnorm
        z = inv_diag * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    if res <= rtol:
        return x, SolveInfo(maxiter, res)
    raise ConvergenceError(res, maxiter)


def local_frames(mesh: TriMesh) -> tuple[np.ndarray, np.ndarray]:
    """Per-face 2D coordinates in an orthonormal tangent frame, and face areas.

    Corner 0 sits at the origin and corner 1 on the positive first axis; the
    frame is right-handed about the face normal, so the triangle is CCW.
    """
    p = mesh.vertices[mesh.faces]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    n = np.cross(d1, d2)
    nn = np.linalg.norm(n, axis=1)
    l1 = np.linalg.norm(d1, axis=1)
    e1 = d1 / np.where(l1 > 0, l1, 1.0)[:, None]
    e2 = np.cross(n, e1) / np.where(nn > 0, nn, 1.0)[:, None]
    q = np.zeros((mesh.n_faces, 3, 2))
    q[:, 1, 0] = l1
    q[:, 2, 0] = np.einsum("ij,ij->i", d2, e1)
    q[:, 2, 1] = np.einsum("ij,ij->i", d2, e2)
    return q, 0.5 * nn


def _check_disk(mesh: TriMesh) -> None:
    t = topology(mesh)
    if not t.is_disk:
        raise NonDiskChartError("chart is not a topological disk", t.n_components,
                                t.euler_characteristic, t.n_boundary_loops, t.genus)


def boundary_diameter_pins(mesh: TriMesh) -> tuple[int, int]:
    """Approximate farthest pair on the boundary loop by a double sweep."""
    loop = np.asarray(boundary_loops(mesh)[0])
    pts = mesh.vertices[loop]
    start = pts[0]
    a = int(np.argmax(np.linalg.norm(pts - start, axis=1)))
    b = int(np.argmax(np.linalg.norm(pts - pts[a], axis=1)))
    return int(loop[a]), int(loop[b])


def lscm_system(mesh: TriMesh) -> sparse.csr_matrix:
    """Real ``(2F, 2V)`` matrix whose squared norm times ``x = [u, v]`` is the LSCM energy."""
    q, area = local_frames(mesh)
    w = np.empty((mesh.n_faces, 3), dtype=complex)
    qc = q[..., 0] + 1j * q[..., 1]
    w[:, 0] = qc[:, 2] - qc[:, 1]
    w[:, 1] = qc[:, 0] - qc[:, 2]
    w[:, 2] = qc[:, 1] - qc[:, 0]
    w /= np.sqrt(area)[:, None]
    nv, nf = mesh.n_vertices, mesh.n_faces
    rows_re = np.repeat(np.arange(nf) * 2, 3)
    rows_im = rows_re + 1
    cu = mesh.faces.ravel()
    cv = cu + nv
    a, b = w.real.ravel(), w.imag.ravel()
    rows = np.concatenate([rows_re, rows_re, rows_im, rows_im])
    cols = np.concatenate([cu, cv, cu, cv])
    vals = np.concatenate([a, -b, b, a])
    return sparse.csr_matrix((vals, (rows, cols)), shape=(2 * nf, 2 * nv))


def flatten_chart(mesh: TriMesh, pins: tuple[int, int] | None = None,
                  pin_uv=((0.0, 0.0), (1.0, 0.0)), normalize_area: bool = True,
                  rtol: float = 1e-10, maxiter: int = 10_000) -> np.ndarray:
    """Least-squares conformal map of a disk-topology chart.

    Two boundary vertices (the double-sweep diameter pair unless ``pins`` is
    given) are fixed at ``pin_uv``; the rest solve the normal equations by
    Jacobi-preconditioned CG. With ``normalize_area`` the result is then
    scaled about the first pin so total UV area equals total surface area,
    which makes the layout comparable under the scale-sensitive energy.

    Returns ``(V, 2)`` coordinates.
    """
    if mesh.n_faces == 0:
        raise FlattenError("chart has no faces")
    _check_disk(mesh)
    _, area = local_frames(mesh)
    lo, hi = mesh.vertices.min(axis=0), mesh.vertices.max(axis=0)
    if np.any(area <= DEGENERATE_AREA * max(float(np.sum((hi - lo) ** 2)), 1e-300)):
        raise FlattenError("chart contains a zero-area face")
    if pins is None:
        pins = boundary_diameter_pins(mesh)
    nv = mesh.n_vertices
    pin_uv = np.asarray(pin_uv, dtype=np.float64)

    A = lscm_system(mesh).tocsc()
    pinned_cols = [pins[0], pins[1], pins[0] + nv, pins[1] + nv]
    pinned_vals = np.array([pin_uv[0, 0], pin_uv[1, 0], pin_uv[0, 1], pin_uv[1, 1]])
    free = np.setdiff1d(np.arange(2 * nv), pinned_cols)
    Af = A[:, free].tocsr()
    rhs = -(A[:, pinned_cols] @ pinned_vals)
    AfT = Af.T.tocsr()
    b = AfT @ rhs
    diag = np.asarray(Af.multiply(Af).sum(axis=0)).ravel()
    x, _ = pcg(lambda y: AfT @ (Af @ y), b, diag, rtol=rtol, maxiter=maxiter)

    full = np.empty(2 * nv)
    full[free] = x
    full[pinned_cols] = pinned_vals
    uv = np.stack([full[:nv], full[nv:]], axis=1)
    if normalize_area:
        uv_area = np.abs(_signed_uv_areas(uv[mesh.faces])).sum()
        if uv_area > 0:
            uv = pin_uv[0] + (uv - pin_uv[0]) * math.sqrt(area.sum() / uv_area)
    return uv


def _signed_uv_areas(tris: np.ndarray) -> np.ndarray:
    d1 = tris[:, 1] - tris[:, 0]
    d2 = tris[:, 2] - tris[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def singular_values_2x2(J: np.ndarray) -> np.ndarray:
    """Closed-form singular values of a stack of 2x2 matrices, ``(N, 2)`` with ``s1 >= s2``."""
    a, b = J[:, 0, 0], J[:, 0, 1]
    c, d = J[:, 1, 0], J[:, 1, 1]
    q = np.hypot((a + d) / 2, (c - b) / 2)
    r = np.hypot((a - d) / 2, (c + b) / 2)
    return np.stack([q + r, np.abs(q - r)], axis=1)


@dataclass
class EnergyReport:
    energy: np.ndarray  # per face, NaN where skipped
    sigma: np.ndarray  # (F, 2)
    counted: int
    skipped: int

    @property
    def mean(self) -> float:
        if self.counted == 0:
            return float("nan")
        return float(np.nanmean(self.energy))


def conformal_energy(mesh: TriMesh, uv: np.ndarray) -> EnergyReport:
    """Per-face ``|ln s1| + |ln s2|`` of the 3D-to-UV Jacobian.

    ``uv`` is either one coordinate per vertex ``(V, 2)`` or per corner
    ``(F, 3, 2)``. Faces with 3D or UV area at most 1e-12 are skipped.
    """
    uv = np.asarray(uv, dtype=np.float64)
    tri_uv = uv[mesh.faces] if uv.shape == (mesh.n_vertices, 2) else uv.reshape(-1, 3, 2)
    q, area = local_frames(mesh)
    uv_area = np.abs(_signed_uv_areas(tri_uv))
    ok = (area > DEGENERATE_AREA) & (uv_area > DEGENERATE_AREA)
    Q = np.stack([q[:, 1] - q[:, 0], q[:, 2] - q[:, 0]], axis=2)  # columns are edge vectors
    P = np.stack([tri_uv[:, 1] - tri_uv[:, 0], tri_uv[:, 2] - tri_uv[:, 0]], axis=2)
    det = Q[:, 0, 0] * Q[:, 1, 1] - Q[:, 0, 1] * Q[:, 1, 0]
    safe = np.where(ok, det, 1.0)
    Qinv = np.empty_like(Q)
    Qinv[:, 0, 0] = Q[:, 1, 1] / safe
    Qinv[:, 0, 1] = -Q[:, 0, 1] / safe
    Qinv[:, 1, 0] = -Q[:, 1, 0] / safe
    Qinv[:, 1, 1] = Q[:, 0, 0] / safe
    J = P @ Qinv
    sigma = singular_values_2x2(J)
    with np.errstate(divide="ignore"):
        e = np.abs(np.log(sigma[:, 0])) + np.abs(np.log(sigma[:, 1]))
    e = np.where(ok, e, np.nan)
    sigma = np.where(ok[:, None], sigma, np.nan)
    counted = int(ok.sum())
    return EnergyReport(e, sigma, counted, mesh.n_faces - counted)


# ---------------------------------------------------------------------------
# packing


@dataclass
class Placement:
    scale: float
    offsets: list[np.ndarray]


def _shelf_fit(sizes: np.ndarray, scale: float, gutter: float):
    order = sorted(range(len(sizes)), key=lambda i: (-sizes[i, 1], i))
    x = y = gutter
    shelf_h = 0.0
    pos = [None] * len(sizes)
    for i in order:
        w, h = sizes[i] * scale
        if x + w + gutter > 1.0 and x > gutter:
            x = gutter
            y += shelf_h + gutter
            shelf_h = 0.0
        if x + w + gutter > 1.0 or y + h + gutter > 1.0:
            return None
        pos[i] = np.array([x, y])
        x += w + gutter
        shelf_h = max(shelf_h, h)
    return pos


def pack_charts(layouts: list[np.ndarray], gutter: float = GUTTER,
                shrink: float = 0.99) -> tuple[list[np.ndarray], Placement]:
    """Shelf-pack chart layouts into the unit square with one global scale.

    Charts are sorted by height and placed row by row with ``gutter`` spacing;
    the scale starts at an upper bound and shrinks until everything fits.
    """
    if not layouts:
        return [], Placement(1.0, [])
    lows = [np.asarray(l).min(axis=0) for l in layouts]
    sizes = np.array([np.asarray(l).max(axis=0) - lo for l, lo in zip(layouts, lows)])
    if not np.all(np.isfinite(sizes)):
        raise FlattenError("chart layout has non-finite coordinates")
    sizes = np.maximum(sizes, 1e-12)
    scale = min((1.0 - 2 * gutter) / sizes.max(), math.sqrt(1.0 / (sizes[:, 0] * sizes[:, 1]).sum()))
    while True:
        pos = _shelf_fit(sizes, scale, gutter)
        if pos is not None:
            break
        scale *= shrink
        if scale < 1e-12:
            raise FlattenError("charts cannot be packed")
    out = [(np.asarray(l) - lo) * scale + p for l, lo, p in zip(layouts, lows, pos)]
    return out, Placement(scale, pos)


@dataclass
class UVAtlas:
    """Flattened charts of a cut mesh with per-face distortion."""

    chart_faces: list[np.ndarray]
    chart_vertices: list[np.ndarray]  # cut-mesh vertex ids per chart vertex
    chart_uv: list[np.ndarray]  # area-normalized layouts, used for the metric
    packed_uv: list[np.ndarray]
    energy: np.ndarray
    sigma: np.ndarray
    counted: int
    skipped: int
    failed_charts: dict[int, str] = field(default_factory=dict)
    placement: Placement | None = None

    @property
    def mean_energy(self) -> float:
        if self.counted == 0:
            return float("nan")
        return float(np.nanmean(self.energy))

    def chart_means(self) -> list[float]:
        out = []
        for faces in self.chart_faces:
            e = self.energy[faces]
            out.append(float(np.nanmean(e)) if np.isfinite(e).any() else float("nan"))
        return out

    def corner_uv(self, cut_mesh: TriMesh) -> np.ndarray:
        """Packed UV per face corner ``(F, 3, 2)``; faces of failed charts get zeros."""
        out = np.zeros((cut_mesh.n_faces, 3, 2))
        for k, faces in enumerate(self.chart_faces):
            if k in self.failed_charts:
                continue
            local = np.searchsorted(self.chart_vertices[k], cut_mesh.faces[faces])
            out[faces] = self.packed_uv[k][local]
        return out

    def report(self) -> dict:
        return {
            "mean_conformal_energy": self.mean_energy,
            "chart_mean_conformal_energy": self.chart_means(),
            "counted_faces": self.counted,
            "skipped_faces": self.skipped,
            "failed_charts": {str(k): v for k, v in self.failed_charts.items()},
        }

    def save_report(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.report(), fh, indent=2)


def unwrap_cut(cut_mesh: TriMesh, charts: list[list[int]], strict: bool = True) -> UVAtlas:
    """Flatten every chart, measure distortion, and pack the layouts.

    With ``strict`` a non-disk chart raises :class:`NonDiskChartError` naming
    the chart; otherwise failed charts are recorded and left out.
    """
    n_faces = cut_mesh.n_faces
    energy = np.full(n_faces, np.nan)
    sigma = np.full((n_faces, 2), np.nan)
    counted = skipped = 0
    chart_faces, chart_vertices, chart_uv = [], [], []
    failed: dict[int, str] = {}
    for k, faces in enumerate(charts):
        faces = np.asarray(faces, dtype=np.int64)
        sub, used = cut_mesh.submesh(faces)
        chart_faces.append(faces)
        chart_vertices.append(used)
        try:
            uv = flatten_chart(sub)
        except FlattenError as err:
            if isinstance(err, NonDiskChartError):
                err.chart = k
            if strict:
                raise
            failed[k] = str(err)
            chart_uv.append(np.zeros((len(used), 2)))
            skipped += len(faces)
            continue
        rep = conformal_energy(sub, uv)
        energy[faces] = rep.energy
        sigma[faces] = rep.sigma
        counted += rep.counted
        skipped += rep.skipped
        chart_uv.append(uv)
    ok = [k for k in range(len(charts)) if k not in failed]
    packed_ok, placement = pack_charts([chart_uv[k] for k in ok])
    packed = [np.zeros_like(u) for u in chart_uv]
    for k, p in zip(ok, packed_ok):
        packed[k] = p
    return UVAtlas(chart_faces, chart_vertices, chart_uv, packed, energy, sigma,
                   counted, skipped, failed, placement)
