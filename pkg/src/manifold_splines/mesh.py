"""Triangulated surface meshes, observation containers, and designs.

Meshes are validated at construction: every triangle must be
non-degenerate, every edge shared by at most two triangles, and the
triangle adjacency graph connected.  Optional per-vertex chart
coordinates (two columns, possibly periodic) support anisotropic models
and space-filling designs.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .errors import BindingError, MeshFormatError, MeshValidationError

_TWO_PI = 2.0 * math.pi


def _as_float_matrix(a, name, ncols):
    out = np.ascontiguousarray(a, dtype=np.float64)
    if out.ndim != 2 or out.shape[1] != ncols:
        raise MeshValidationError(f"{name} must have shape (k, {ncols})")
    if not np.all(np.isfinite(out)):
        raise MeshValidationError(f"{name} contains non-finite entries")
    return out


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Immutable triangulated surface embedded in R^3.

    Attributes
    ----------
    vertices : (m, 3) float array
    triangles : (t, 3) int array
        Vertex indices of each triangle.
    chart : (m, 2) float array or None
        Per-vertex chart coordinates; required for anisotropy and
        space-filling designs.
    chart_periods : (2,) float array
        Period of each chart coordinate, nan when aperiodic.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    chart: np.ndarray | None = None
    chart_periods: np.ndarray = field(
        default_factory=lambda: np.array([np.nan, np.nan])
    )

    def __post_init__(self):
        verts = _as_float_matrix(self.vertices, "vertices", 3)
        tris = np.ascontiguousarray(self.triangles)
        if tris.ndim != 2 or tris.shape[1] != 3:
            raise MeshValidationError("triangles must have shape (t, 3)")
        if not np.issubdtype(tris.dtype, np.integer):
            raise MeshValidationError("triangle indices must be integers")
        tris = tris.astype(np.int64)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "triangles", tris)
        if self.chart is not None:
            chart = _as_float_matrix(self.chart, "chart", 2)
            if chart.shape[0] != verts.shape[0]:
                raise MeshValidationError("chart must have one row per vertex")
            object.__setattr__(self, "chart", chart)
        periods = np.asarray(self.chart_periods, dtype=np.float64)
        if periods.shape != (2,):
            raise MeshValidationError("chart_periods must have shape (2,)")
        object.__setattr__(self, "chart_periods", periods)
        self._validate_topology()

    # -- validation -------------------------------------------------

    def _validate_topology(self):
        m = self.n_vertices
        tris = self.triangles
        if tris.shape[0] == 0:
            raise MeshValidationError("mesh has no triangles")
        if tris.min() < 0 or tris.max() >= m:
            bad = int(np.argmax((tris < 0) | (tris >= m)).item())
            raise MeshValidationError(
                f"triangle {bad // 3} references vertex {tris.flat[bad]}, "
                f"outside [0, {m})"
            )
        repeated = (
            (tris[:, 0] == tris[:, 1])
            | (tris[:, 1] == tris[:, 2])
            | (tris[:, 0] == tris[:, 2])
        )
        if repeated.any():
            raise MeshValidationError(
                f"triangle {int(np.argmax(repeated))} repeats a vertex"
            )
        areas = self.triangle_areas()
        tiny = areas <= 1e-14 * areas.mean()
        if tiny.any():
            raise MeshValidationError(
                f"triangle {int(np.argmax(tiny))} is degenerate (zero area)"
            )
        used = np.zeros(m, dtype=bool)
        used[tris.ravel()] = True
        if not used.all():
            raise MeshValidationError(
                f"vertex {int(np.argmin(used))} belongs to no triangle"
            )
        edges, counts, edge_tris = self._edge_table()
        if counts.max() > 2:
            e = edges[int(np.argmax(counts > 2))]
            raise MeshValidationError(
                f"edge ({e[0]}, {e[1]}) is shared by more than two triangles"
            )
        if not self._triangles_connected(edge_tris, counts):
            raise MeshValidationError("triangle adjacency graph is disconnected")

    def _edge_table(self):
        tris = self.triangles
        raw = np.concatenate(
            [tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]], axis=0
        )
        raw.sort(axis=1)
        owner = np.tile(np.arange(tris.shape[0]), 3)
        edges, inverse, counts = np.unique(
            raw, axis=0, return_inverse=True, return_counts=True
        )
        order = np.argsort(inverse, kind="stable")
        edge_tris = np.full((edges.shape[0], 2), -1, dtype=np.int64)
        pos = np.zeros(edges.shape[0], dtype=np.int64)
        for idx in order:
            e = inverse[idx]
            if pos[e] < 2:
                edge_tris[e, pos[e]] = owner[idx]
                pos[e] += 1
        return edges, counts, edge_tris

    def _triangles_connected(self, edge_tris, counts):
        t = self.triangles.shape[0]
        parent = np.arange(t)

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for e in np.nonzero(counts == 2)[0]:
            ra, rb = find(edge_tris[e, 0]), find(edge_tris[e, 1])
            if ra != rb:
                parent[ra] = rb
        root = find(0)
        return all(find(i) == root for i in range(t))

    # -- basic geometry ----------------------------------------------

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    def triangle_areas(self) -> np.ndarray:
        v = self.vertices[self.triangles]
        cross = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
        return 0.5 * np.linalg.norm(cross, axis=1)

    def bbox_diagonal(self) -> float:
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return float(np.linalg.norm(hi - lo))

    def boundary_edges(self) -> np.ndarray:
        """Edges belonging to exactly one triangle, as a (k, 2) index array."""
        edges, counts, _ = self._edge_table()
        return edges[counts == 1]

    def triangle_chart_coords(self) -> np.ndarray:
        """Chart coordinates of each triangle's vertices, seam-unwrapped.

        Periodic coordinates of vertices 1 and 2 are shifted by whole
        periods to the representative nearest vertex 0, so each triangle
        gets a consistent flat chart patch.
        """
        if self.chart is None:
            raise MeshValidationError("mesh has no chart coordinates")
        coords = self.chart[self.triangles].copy()  # (t, 3, 2)
        for d in range(2):
            period = self.chart_periods[d]
            if not np.isfinite(period):
                continue
            ref = coords[:, :1, d]
            delta = coords[:, :, d] - ref
            coords[:, :, d] = ref + delta - period * np.round(delta / period)
        return coords


# -- observations ----------------------------------------------------


@dataclass(frozen=True, eq=False)
class ObservationSet:
    """Scattered observations, located by node index or embedded point.

    Node-index locations require ``tau == 0`` (exact interpolation at
    mesh nodes); embedded 3-D points require ``tau > 0``.
    """

    locations: np.ndarray
    values: np.ndarray
    tau: float = 0.0

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.shape[0] == 0:
            raise MeshValidationError("values must be a non-empty 1-D array")
        if not np.all(np.isfinite(values)):
            raise MeshValidationError("observation values must be finite")
        locs = np.asarray(self.locations)
        if locs.ndim == 1:
            if not np.issubdtype(locs.dtype, np.integer):
                raise MeshValidationError("node locations must be integers")
            locs = locs.astype(np.int64)
            if np.unique(locs).size != locs.size:
                raise MeshValidationError("node locations must be distinct")
            if self.tau != 0.0:
                raise MeshValidationError(
                    "node-index observations require tau == 0"
                )
        elif locs.ndim == 2 and locs.shape[1] == 3:
            locs = np.ascontiguousarray(locs, dtype=np.float64)
            if self.tau <= 0.0:
                raise MeshValidationError(
                    "embedded-point observations require tau > 0"
                )
        else:
            raise MeshValidationError(
                "locations must be (n,) node indices or (n, 3) points"
            )
        if locs.shape[0] != values.shape[0]:
            raise MeshValidationError("locations and values differ in length")
        if not self.tau >= 0.0:
            raise MeshValidationError("tau must be non-negative")
        object.__setattr__(self, "locations", locs)
        object.__setattr__(self, "values", values)

    @property
    def scenario(self) -> int:
        return 1 if self.locations.ndim == 1 else 2

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class BoundObservations:
    """Observation locations resolved against a fixed mesh.

    ``matrix`` is the sparse projection with one row per observation;
    rows are convex weights over one triangle's vertices (unit rows for
    node-index observations).
    """

    scenario: int
    n_vertices: int
    matrix: object  # scipy.sparse.csr_matrix, (n, m)
    node_indices: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def bind_observations(
    mesh: TriangleMesh, obs: ObservationSet, tol_factor: float = 1e-6
) -> BoundObservations:
    """Attach observation locations to a mesh.

    Node indices are range-checked; embedded points are located inside a
    triangle within ``tol_factor`` times the bounding-box diagonal and
    expressed as barycentric weight rows.
    """
    from scipy import sparse

    m = mesh.n_vertices
    if obs.scenario == 1:
        idx = obs.locations
        if idx.min() < 0 or idx.max() >= m:
            raise BindingError("observation node index out of range")
        mat = sparse.csr_matrix(
            (np.ones(obs.n), (np.arange(obs.n), idx)), shape=(obs.n, m)
        )
        return BoundObservations(1, m, mat, node_indices=idx.copy())

    tol = tol_factor * mesh.bbox_diagonal()
    v = mesh.vertices[mesh.triangles]  # (t, 3, 3)
    e1 = v[:, 1] - v[:, 0]
    e2 = v[:, 2] - v[:, 0]
    g11 = np.einsum("ij,ij->i", e1, e1)
    g12 = np.einsum("ij,ij->i", e1, e2)
    g22 = np.einsum("ij,ij->i", e2, e2)
    det = g11 * g22 - g12 * g12
    # barycentric slack equivalent to a length tol inside each triangle
    edge_len = np.sqrt(np.maximum(g11, g22))
    areas2 = np.sqrt(np.maximum(det, 0.0))  # twice the area
    slack = 1e-9 + tol * edge_len / np.maximum(areas2, 1e-300)

    rows, cols, vals = [], [], []
    for k, p in enumerate(obs.locations):
        d = p[None, :] - v[:, 0]
        p1 = np.einsum("ij,ij->i", d, e1)
        p2 = np.einsum("ij,ij->i", d, e2)
        s = (g22 * p1 - g12 * p2) / det
        t = (g11 * p2 - g12 * p1) / det
        inside = (s >= -slack) & (t >= -slack) & (s + t <= 1.0 + slack)
        if not inside.any():
            raise BindingError(
                f"observation {k} at {p.tolist()} lies on no triangle"
            )
        proj = v[:, 0] + s[:, None] * e1 + t[:, None] * e2
        dist = np.linalg.norm(p[None, :] - proj, axis=1)
        dist = np.where(inside, dist, np.inf)
        best = int(np.argmin(dist))
        if dist[best] > tol:
            raise BindingError(
                f"observation {k} at {p.tolist()} is {dist[best]:.3g} from the "
                f"surface (tolerance {tol:.3g})"
            )
        w = np.array([1.0 - s[best] - t[best], s[best], t[best]])
        w = np.clip(w, 0.0, 1.0)
        w /= w.sum()
        rows.extend([k, k, k])
        cols.extend(mesh.triangles[best].tolist())
        vals.extend(w.tolist())
    mat = sparse.csr_matrix((vals, (rows, cols)), shape=(obs.n, m))
    mat.sum_duplicates()
    return BoundObservations(2, m, mat)


# -- generators ------------------------------------------------------


def _check_step(step: float, span: float, what: str) -> int:
    if not 0.0 < step <= span / 2.0:
        raise MeshValidationError(f"{what} must lie in (0, {span / 2:g}]")
    k = span / step
    if abs(k - round(k)) > 1e-9:
        raise MeshValidationError(f"{what} must divide {span:g} evenly")
    return int(round(k))


def generate_sphere_mesh(
    lat_step: float, lon_step: float, radius: float = 1.0
) -> TriangleMesh:
    """Latitude-longitude sphere triangulation with merged poles.

    Steps are in degrees and must divide 180 (latitude) and 360
    (longitude).  Pole caps are triangle fans; the chart stores
    (colatitude, longitude) in radians with the longitude periodic.
    """
    if radius <= 0:
        raise MeshValidationError("radius must be positive")
    n_bands = _check_step(lat_step, 180.0, "lat_step")
    n_lon = _check_step(lon_step, 360.0, "lon_step")
    n_rings = n_bands - 1
    if n_rings < 1:
        raise MeshValidationError("lat_step must produce at least one ring")

    theta = np.radians(lat_step) * np.arange(1, n_rings + 1)
    phi = np.radians(lon_step) * np.arange(n_lon)
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    ring_xyz = np.stack(
        [
            np.sin(tt) * np.cos(pp),
            np.sin(tt) * np.sin(pp),
            np.cos(tt) * np.ones_like(pp),
        ],
        axis=-1,
    ).reshape(-1, 3)
    vertices = np.concatenate(
        [[[0.0, 0.0, 1.0]], ring_xyz, [[0.0, 0.0, -1.0]]], axis=0
    )
    vertices *= radius
    chart = np.concatenate(
        [
            [[0.0, 0.0]],
            np.stack([tt.ravel(), pp.ravel()], axis=1),
            [[math.pi, 0.0]],
        ],
        axis=0,
    )

    def ring(i, j):
        return 1 + i * n_lon + (j % n_lon)

    south = 1 + n_rings * n_lon
    tris = []
    for j in range(n_lon):
        tris.append([0, ring(0, j), ring(0, j + 1)])
    for i in range(n_rings - 1):
        for j in range(n_lon):
            a, b = ring(i, j), ring(i, j + 1)
            c, d = ring(i + 1, j), ring(i + 1, j + 1)
            tris.append([a, c, d])
            tris.append([a, d, b])
    for j in range(n_lon):
        tris.append([south, ring(n_rings - 1, j + 1), ring(n_rings - 1, j)])
    return TriangleMesh(
        vertices,
        np.array(tris, dtype=np.int64),
        chart=chart,
        chart_periods=np.array([np.nan, _TWO_PI]),
    )


def generate_cylinder_mesh(
    theta_step: float, z_step: float, radius: float, height: float
) -> TriangleMesh:
    """Open cylinder (no caps) triangulated on a regular (theta, z) grid.

    ``theta_step`` is in degrees and must divide 360; ``z_step`` must
    divide ``height``.  The chart stores (theta, z) with theta periodic.
    """
    if radius <= 0 or height <= 0:
        raise MeshValidationError("radius and height must be positive")
    n_theta = _check_step(theta_step, 360.0, "theta_step")
    if z_step <= 0:
        raise MeshValidationError("z_step must be positive")
    n_seg = height / z_step
    if abs(n_seg - round(n_seg)) > 1e-9:
        raise MeshValidationError("z_step must divide height evenly")
    n_seg = int(round(n_seg))
    n_rows = n_seg + 1

    theta = np.radians(theta_step) * np.arange(n_theta)
    z = z_step * np.arange(n_rows)
    zz, tt = np.meshgrid(z, theta, indexing="ij")
    vertices = np.stack(
        [radius * np.cos(tt), radius * np.sin(tt), zz], axis=-1
    ).reshape(-1, 3)
    chart = np.stack([tt.ravel(), zz.ravel()], axis=1)

    def node(r, k):
        return r * n_theta + (k % n_theta)

    tris = []
    for r in range(n_seg):
        for k in range(n_theta):
            a, b = node(r, k), node(r, k + 1)
            c, d = node(r + 1, k), node(r + 1, k + 1)
            tris.append([a, b, d])
            tris.append([a, d, c])
    return TriangleMesh(
        vertices,
        np.array(tris, dtype=np.int64),
        chart=chart,
        chart_periods=np.array([_TWO_PI, np.nan]),
    )


# -- OFF file I/O ----------------------------------------------------


def _off_tokens(text: str):
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if body:
            yield lineno, body.split()


def load_mesh(path) -> TriangleMesh:
    """Read a triangle mesh from an OFF file."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    tokens = _off_tokens(text)
    try:
        _, header = next(tokens)
    except StopIteration:
        raise MeshFormatError("empty OFF file") from None
    if header != ["OFF"]:
        raise MeshFormatError("missing OFF header")
    try:
        _, counts = next(tokens)
        nv, nf = int(counts[0]), int(counts[1])
    except (StopIteration, IndexError, ValueError):
        raise MeshFormatError("malformed OFF count line") from None
    vertices = np.empty((nv, 3))
    for i in range(nv):
        try:
            lineno, tok = next(tokens)
            vertices[i] = [float(tok[0]), float(tok[1]), float(tok[2])]
        except (StopIteration, IndexError, ValueError):
            raise MeshFormatError(f"malformed vertex line {i}") from None
    triangles = np.empty((nf, 3), dtype=np.int64)
    for i in range(nf):
        try:
            lineno, tok = next(tokens)
            if int(tok[0]) != 3:
                raise MeshFormatError(
                    f"face {i} (line {lineno}) is not a triangle"
                )
            triangles[i] = [int(tok[1]), int(tok[2]), int(tok[3])]
        except MeshFormatError:
            raise
        except (StopIteration, IndexError, ValueError):
            raise MeshFormatError(f"malformed face line {i}") from None
    return TriangleMesh(vertices, triangles)


def save_mesh(mesh: TriangleMesh, path) -> None:
    """Write a mesh in OFF format (canonical, round-trip safe)."""
    buf = io.StringIO()
    buf.write("OFF\n")
    buf.write(f"{mesh.n_vertices} {mesh.n_triangles} 0\n")
    for v in mesh.vertices:
        buf.write(f"{v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
    for t in mesh.triangles:
        buf.write(f"3 {t[0]} {t[1]} {t[2]}\n")
    from .data import atomic_write_text

    atomic_write_text(path, buf.getvalue())


# -- observation CSV I/O ----------------------------------------------


def load_observations_csv(path, tau: float, mesh: TriangleMesh | None = None):
    """Read observations from CSV.

    Accepts header ``node_index,value`` (node observations) or
    ``x,y,z,value`` (embedded points).  With ``tau == 0`` point
    observations are snapped to their nearest mesh node, which requires
    ``mesh``; duplicate snap targets are rejected.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise MeshFormatError("empty observation file") from None
        rows = [r for r in reader if any(cell.strip() for cell in r)]
    if header == ["node_index", "value"]:
        try:
            idx = np.array([int(r[0]) for r in rows], dtype=np.int64)
            values = np.array([float(r[1]) for r in rows])
        except (IndexError, ValueError):
            raise MeshFormatError("malformed observation row") from None
        if tau != 0.0:
            if mesh is None:
                raise MeshFormatError(
                    "node observations with tau > 0 require a mesh to embed"
                )
            return ObservationSet(mesh.vertices[idx], values, tau)
        return ObservationSet(idx, values, 0.0)
    if header == ["x", "y", "z", "value"]:
        try:
            pts = np.array([[float(r[0]), float(r[1]), float(r[2])] for r in rows])
            values = np.array([float(r[3]) for r in rows])
        except (IndexError, ValueError):
            raise MeshFormatError("malformed observation row") from None
        if tau > 0.0:
            return ObservationSet(pts, values, tau)
        if mesh is None:
            raise MeshFormatError(
                "point observations with tau == 0 require a mesh to snap to"
            )
        d2 = ((pts[:, None, :] - mesh.vertices[None, :, :]) ** 2).sum(axis=2)
        idx = np.argmin(d2, axis=1).astype(np.int64)
        if np.unique(idx).size != idx.size:
            raise BindingError("two observations snap to the same mesh node")
        return ObservationSet(idx, values, 0.0)
    raise MeshFormatError(
        "observation header must be 'node_index,value' or 'x,y,z,value'"
    )


def save_observations_csv(obs: ObservationSet, path) -> None:
    """Write observations with the canonical header for their scenario."""
    from .data import atomic_write_text

    buf = io.StringIO()
    if obs.scenario == 1:
        buf.write("node_index,value\n")
        for i, val in zip(obs.locations, obs.values):
            buf.write(f"{i},{val:.17g}\n")
    else:
        buf.write("x,y,z,value\n")
        for p, val in zip(obs.locations, obs.values):
            buf.write(f"{p[0]:.17g},{p[1]:.17g},{p[2]:.17g},{val:.17g}\n")
    atomic_write_text(path, buf.getvalue())


# -- space-filling designs --------------------------------------------


def _normalized_chart(mesh: TriangleMesh):
    """Chart coordinates scaled to the unit square, plus periodic flags."""
    if mesh.chart is None:
        raise MeshValidationError("design requires chart coordinates")
    coords = np.empty_like(mesh.chart)
    periodic = np.isfinite(mesh.chart_periods)
    for d in range(2):
        col = mesh.chart[:, d]
        if periodic[d]:
            coords[:, d] = np.mod(col, mesh.chart_periods[d]) / mesh.chart_periods[d]
        else:
            lo, hi = col.min(), col.max()
            span = hi - lo if hi > lo else 1.0
            coords[:, d] = (col - lo) / span
    return coords, periodic


def _wrapped_min_dist(points, periodic):
    """Smallest pairwise distance among unit-square points with wrapping."""
    diff = np.abs(points[:, None, :] - points[None, :, :])
    for d in range(2):
        if periodic[d]:
            diff[:, :, d] = np.minimum(diff[:, :, d], 1.0 - diff[:, :, d])
    d2 = (diff**2).sum(axis=2)
    np.fill_diagonal(d2, np.inf)
    return math.sqrt(d2.min())


def maximin_node_design(
    mesh: TriangleMesh, n: int, seed: int, n_candidates: int = 32
) -> np.ndarray:
    """Choose n distinct node indices via a maximin Latin hypercube.

    Candidate Latin hypercube samples are drawn in normalized chart
    coordinates, scored by their smallest pairwise (wrapped) distance,
    and the best one is snapped to nearest mesh nodes, skipping nodes
    already taken.  Deterministic for a given seed.
    """
    m = mesh.n_vertices
    if not 1 <= n <= m:
        raise MeshValidationError(f"design size must lie in [1, {m}]")
    coords, periodic = _normalized_chart(mesh)
    if n == m:
        return np.arange(m, dtype=np.int64)

    rng = np.random.default_rng(seed)
    sampler = qmc.LatinHypercube(d=2, seed=rng)
    best_pts, best_score = None, -np.inf
    for _ in range(n_candidates):
        pts = sampler.random(n)
        score = _wrapped_min_dist(pts, periodic) if n > 1 else np.inf
        if score > best_score:
            best_pts, best_score = pts, score

    chosen = np.empty(n, dtype=np.int64)
    taken = np.zeros(m, dtype=bool)
    for k in range(n):
        diff = np.abs(coords - best_pts[k][None, :])
        for d in range(2):
            if periodic[d]:
                diff[:, d] = np.minimum(diff[:, d], 1.0 - diff[:, d])
        d2 = (diff**2).sum(axis=1)
        d2[taken] = np.inf
        chosen[k] = int(np.argmin(d2))
        taken[chosen[k]] = True
    return chosen
