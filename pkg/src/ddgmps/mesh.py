"""Unstructured triangular meshes with edge adjacency and periodic pairing.

Cells are stored with a clockwise vertex orientation (the vertex-including
quadrature rule assumes it).  Each edge carries a unit normal pointing from
its left cell into its right cell; periodic partner edges are merged into a
single logical edge with a translation shift, so flux loops never need to
special-case periodicity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def _cross2(a, b):
    """z-component of the cross product of 2-vectors (NumPy 2 removed 2D cross)."""
    a = np.asarray(a)
    b = np.asarray(b)
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


class MeshError(Exception):
    """Invalid mesh topology or geometry."""


# edge boundary tags
TAG_INTERIOR = 0
TAG_DIRICHLET = 1
TAG_PERIODIC = 2


@dataclass(frozen=True)
class Point2:
    x: float
    y: float


@dataclass
class Cell:
    """View of one triangle: vertex/edge/neighbor ids plus basic geometry."""

    index: int
    vertex_ids: np.ndarray
    edge_ids: np.ndarray
    neighbor_ids: np.ndarray  # -1 where no neighbor (true boundary)
    area: float
    diameter: float


@dataclass
class Edge:
    """View of one edge; ``right_cell`` is -1 on non-periodic boundary edges."""

    index: int
    vertex_ids: np.ndarray
    left_cell: int
    right_cell: int
    boundary_tag: int
    length: float
    unit_normal: np.ndarray
    midpoint: np.ndarray
    shift: np.ndarray  # translation from left-side geometry to the periodic partner


@dataclass
class TriMesh:
    vertices: np.ndarray        # (nv, 2)
    cells: np.ndarray           # (nc, 3) vertex ids, clockwise
    cell_edges: np.ndarray      # (nc, 3), edge i joins local vertices i, i+1
    cell_sides: np.ndarray      # (nc, 3), 0 if the cell is the edge's left cell
    neighbors: np.ndarray       # (nc, 3), -1 at true boundary
    areas: np.ndarray
    diameters: np.ndarray
    centroids: np.ndarray
    inradii: np.ndarray
    bary_grads: np.ndarray      # (nc, 3, 2) gradients of barycentric coords
    edge_vertices: np.ndarray   # (ne, 2)
    edge_left: np.ndarray
    edge_right: np.ndarray
    edge_normals: np.ndarray    # (ne, 2) unit, left -> right
    edge_lengths: np.ndarray
    edge_midpoints: np.ndarray
    edge_tags: np.ndarray
    edge_shifts: np.ndarray     # (ne, 2)
    theta_min: float
    theta_max: float
    h: float
    periods: tuple[float, float] | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    # -- convenience views -------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_edges(self) -> int:
        return len(self.edge_vertices)

    def cell(self, i: int) -> Cell:
        return Cell(i, self.cells[i], self.cell_edges[i], self.neighbors[i],
                    float(self.areas[i]), float(self.diameters[i]))

    def edge(self, i: int) -> Edge:
        return Edge(i, self.edge_vertices[i], int(self.edge_left[i]),
                    int(self.edge_right[i]), int(self.edge_tags[i]),
                    float(self.edge_lengths[i]), self.edge_normals[i],
                    self.edge_midpoints[i], self.edge_shifts[i])

    def cell_vertices(self, i: int) -> np.ndarray:
        return self.vertices[self.cells[i]]

    def outward_sign(self, edge_index: int, cell_index: int) -> float:
        """+1 if the stored edge normal is outward for this cell, else -1."""
        return 1.0 if self.edge_left[edge_index] == cell_index else -1.0

    # -- geometry queries --------------------------------------------------

    def other_edge_endpoints(self, cell_index: int, edge_index: int):
        """Endpoint coordinates of the two edges of the cell other than ``edge_index``."""
        segs = []
        verts = self.cells[cell_index]
        for k in range(3):
            e = self.cell_edges[cell_index, k]
            if e == edge_index:
                continue
            a = self.vertices[verts[k]]
            b = self.vertices[verts[(k + 1) % 3]]
            segs.append((a, b))
        return segs

    def interior_distance(self, cell_index: int, edge_index: int,
                          origin: np.ndarray, direction: np.ndarray) -> float:
        """Distance from ``origin`` along ``direction`` to the first crossing of
        one of the cell's edges other than ``edge_index``."""
        best = math.inf
        for a, b in self.other_edge_endpoints(cell_index, edge_index):
            t = _ray_line_distance(origin, direction, a, b)
            if t is not None and t > 0.0:
                best = min(best, t)
        if not math.isfinite(best):
            raise MeshError(
                f"direction parallel to all candidate edges of cell {cell_index}")
        return best

    def total_area(self) -> float:
        return float(self.areas.sum())


def _ray_line_distance(origin, direction, a, b):
    """Signed parameter t with origin + t*direction on the line through a, b."""
    e = b - a
    denom = direction[0] * e[1] - direction[1] * e[0]
    if abs(denom) < 1e-300:
        return None
    w = a - origin
    return (w[0] * e[1] - w[1] * e[0]) / denom


def edge_length_scale(mesh: TriMesh, edge: Edge | int, direction: np.ndarray,
                      origin: np.ndarray) -> float:
    """Length scale of an edge at ``origin`` measured along ``direction``.

    Minimum over the two adjacent cells of the distance from ``origin``, along
    the line through it in ``direction``, to the first crossing of another edge
    of that cell.  ``direction`` must point from the left cell into the right
    one; for boundary edges only the interior side contributes.
    """
    if isinstance(edge, (int, np.integer)):
        edge = mesh.edge(int(edge))
    d = np.asarray(direction, dtype=float)
    nrm = math.hypot(d[0], d[1])
    if nrm == 0.0:
        raise ValueError("zero direction")
    d = d / nrm
    origin = np.asarray(origin, dtype=float)
    h = mesh.interior_distance(edge.left_cell, edge.index, origin, -d)
    if edge.right_cell >= 0:
        h_right = mesh.interior_distance(edge.right_cell, edge.index,
                                         origin + edge.shift, d)
        h = min(h, h_right)
    return h


def edge_scales_along(mesh: TriMesh, points: np.ndarray,
                      directions: np.ndarray) -> np.ndarray:
    """Vectorized ``edge_length_scale`` at quadrature points.

    ``points`` and ``directions`` have shape (ne, nq, 2); directions need not
    be unit but must point from left to right.  Returns (ne, nq) distances.
    """
    ne, nq, _ = points.shape
    d = directions / np.linalg.norm(directions, axis=-1, keepdims=True)
    segs_l, segs_r, has_right, shifts = _other_edge_arrays(mesh)

    def side_dist(origins, direc, segs):
        # segs: (ne, 2 other edges, 2 endpoints, 2)
        a = segs[:, None, :, 0, :]          # (ne,1,2,2)
        b = segs[:, None, :, 1, :]
        e = b - a
        dd = direc[:, :, None, :]           # (ne,nq,1,2)
        denom = dd[..., 0] * e[..., 1] - dd[..., 1] * e[..., 0]
        w = a - origins[:, :, None, :]
        t = np.where(np.abs(denom) > 1e-300,
                     (w[..., 0] * e[..., 1] - w[..., 1] * e[..., 0])
                     / np.where(np.abs(denom) > 1e-300, denom, 1.0),
                     np.inf)
        t = np.where(t > 1e-14, t, np.inf)
        return t.min(axis=2)

    h = side_dist(points, -d, segs_l)
    hr = side_dist(points + shifts[:, None, :], d, segs_r)
    h = np.where(has_right[:, None], np.minimum(h, hr), h)
    return h


def _other_edge_arrays(mesh: TriMesh):
    """Per-edge endpoint arrays of the two 'other' edges on each side (cached)."""
    key = "other_edge_arrays"
    if key in mesh._cache:
        return mesh._cache[key]
    ne = mesh.n_edges
    segs_l = np.zeros((ne, 2, 2, 2))
    segs_r = np.zeros((ne, 2, 2, 2))
    has_right = mesh.edge_right >= 0
    for e in range(ne):
        for slot, (a, b) in enumerate(
                mesh.other_edge_endpoints(int(mesh.edge_left[e]), e)):
            segs_l[e, slot, 0] = a
            segs_l[e, slot, 1] = b
        if has_right[e]:
            for slot, (a, b) in enumerate(
                    mesh.other_edge_endpoints(int(mesh.edge_right[e]), e)):
                segs_r[e, slot, 0] = a
                segs_r[e, slot, 1] = b
    out = (segs_l, segs_r, has_right, mesh.edge_shifts)
    mesh._cache[key] = out
    return out


# ---------------------------------------------------------------------------
# construction

def build_mesh(vertices: np.ndarray, cells: np.ndarray,
               periods: tuple[float, float] | None = None,
               tol: float = 1e-10) -> TriMesh:
    """Assemble adjacency, orientation and statistics from raw arrays.

    ``periods`` = (Lx, Ly) requests periodic pairing of boundary edges by
    coordinate translation (0 disables a direction).  Orientation is
    normalized to clockwise; degenerate triangles are rejected.
    """
    vertices = np.asarray(vertices, dtype=float)
    cells = np.asarray(cells, dtype=np.int64).copy()
    nv, nc = len(vertices), len(cells)
    if cells.size and (cells.min() < 0 or cells.max() >= nv):
        raise MeshError("cell vertex index out of range")

    # normalize to clockwise (negative signed area)
    p = vertices[cells]
    signed = 0.5 * _cross2(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    flip = signed > 0
    cells[flip] = cells[flip][:, [0, 2, 1]]
    p = vertices[cells]
    signed = 0.5 * _cross2(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    areas = -signed
    scale = float(np.max(np.abs(vertices))) if nv else 1.0
    if np.any(areas <= 1e-14 * scale**2):
        raise MeshError("zero-area or inverted triangle")

    seen = set()
    for c in range(nc):
        key = tuple(sorted(cells[c]))
        if key in seen:
            raise MeshError(f"duplicate cell {key}")
        seen.add(key)

    used = np.zeros(nv, dtype=bool)
    used[cells.ravel()] = True
    if not used.all():
        raise MeshError("dangling vertex")

    # edge table
    edge_map: dict[tuple[int, int], int] = {}
    edge_vertices = []
    edge_left = []
    edge_right = []
    cell_edges = np.full((nc, 3), -1, dtype=np.int64)
    for c in range(nc):
        for k in range(3):
            a, b = int(cells[c, k]), int(cells[c, (k + 1) % 3])
            key = (a, b) if a < b else (b, a)
            e = edge_map.get(key)
            if e is None:
                e = len(edge_vertices)
                edge_map[key] = e
                edge_vertices.append((a, b))
                edge_left.append(c)
                edge_right.append(-1)
            else:
                if edge_right[e] != -1:
                    raise MeshError(f"edge {key} shared by more than two cells")
                edge_right[e] = c
            cell_edges[c, k] = e

    edge_vertices = np.array(edge_vertices, dtype=np.int64)
    edge_left = np.array(edge_left, dtype=np.int64)
    edge_right = np.array(edge_right, dtype=np.int64)
    ne = len(edge_vertices)
    edge_tags = np.where(edge_right < 0, TAG_DIRICHLET, TAG_INTERIOR).astype(np.int8)
    edge_shifts = np.zeros((ne, 2))

    if periods is not None and (periods[0] or periods[1]):
        (edge_vertices, edge_left, edge_right, edge_tags, edge_shifts,
         cell_edges) = _pair_periodic(vertices, edge_vertices, edge_left,
                                      edge_right, edge_tags, edge_shifts,
                                      cell_edges, periods, tol)
        ne = len(edge_vertices)

    ea = vertices[edge_vertices[:, 0]]
    eb = vertices[edge_vertices[:, 1]]
    edge_lengths = np.linalg.norm(eb - ea, axis=1)
    edge_midpoints = 0.5 * (ea + eb)
    # unit normal, oriented away from the left cell's opposite vertex
    t = eb - ea
    normals = np.stack([t[:, 1], -t[:, 0]], axis=1)
    normals /= edge_lengths[:, None]
    cent = vertices[cells].mean(axis=1)
    away = edge_midpoints - cent[edge_left]
    sgn = np.sign(np.einsum("ij,ij->i", normals, away))
    if np.any(sgn == 0):
        raise MeshError("degenerate edge normal")
    edge_normals = normals * sgn[:, None]

    cell_sides = (edge_left[cell_edges] != np.arange(nc)[:, None]).astype(np.int8)
    nbr_cells = np.where(cell_sides == 0, edge_right[cell_edges],
                         edge_left[cell_edges])

    diameters = np.maximum(
        np.maximum(np.linalg.norm(p[:, 0] - p[:, 1], axis=1),
                   np.linalg.norm(p[:, 1] - p[:, 2], axis=1)),
        np.linalg.norm(p[:, 2] - p[:, 0], axis=1))
    perim = (np.linalg.norm(p[:, 0] - p[:, 1], axis=1)
             + np.linalg.norm(p[:, 1] - p[:, 2], axis=1)
             + np.linalg.norm(p[:, 2] - p[:, 0], axis=1))
    inradii = 2.0 * areas / perim

    bary_grads = np.empty((nc, 3, 2))
    for i in range(3):
        opp = p[:, (i + 2) % 3] - p[:, (i + 1) % 3]
        g = np.stack([-opp[:, 1], opp[:, 0]], axis=1) / (2.0 * signed[:, None])
        bary_grads[:, i] = g

    angles = _cell_angles(p)
    mesh = TriMesh(
        vertices=vertices, cells=cells, cell_edges=cell_edges,
        cell_sides=cell_sides, neighbors=nbr_cells, areas=areas,
        diameters=diameters, centroids=cent, inradii=inradii,
        bary_grads=bary_grads, edge_vertices=edge_vertices,
        edge_left=edge_left, edge_right=edge_right, edge_normals=edge_normals,
        edge_lengths=edge_lengths, edge_midpoints=edge_midpoints,
        edge_tags=edge_tags, edge_shifts=edge_shifts,
        theta_min=float(angles.min()), theta_max=float(angles.max()),
        h=float(diameters.max()), periods=periods)
    return mesh


def _cell_angles(p: np.ndarray) -> np.ndarray:
    """Interior angles (nc, 3) of each triangle."""
    angles = np.empty((len(p), 3))
    for i in range(3):
        u = p[:, (i + 1) % 3] - p[:, i]
        v = p[:, (i + 2) % 3] - p[:, i]
        cosang = np.einsum("ij,ij->i", u, v) / (
            np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
        angles[:, i] = np.arccos(np.clip(cosang, -1.0, 1.0))
    return angles


def cell_angles(mesh: TriMesh) -> np.ndarray:
    return _cell_angles(mesh.vertices[mesh.cells])


def _pair_periodic(vertices, edge_vertices, edge_left, edge_right, edge_tags,
                   edge_shifts, cell_edges, periods, tol):
    """Merge matching boundary edges into single periodic edges."""
    Lx, Ly = periods
    boundary = np.where(edge_right < 0)[0]
    mids = 0.5 * (vertices[edge_vertices[:, 0]] + vertices[edge_vertices[:, 1]])
    shifts = []
    if Lx:
        shifts += [(Lx, 0.0), (-Lx, 0.0)]
    if Ly:
        shifts += [(0.0, Ly), (0.0, -Ly)]

    index = {}
    for e in boundary:
        index[(round(mids[e, 0] / tol), round(mids[e, 1] / tol))] = e

    def find(pt):
        base = (pt[0] / tol, pt[1] / tol)
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                e = index.get((round(base[0]) + dx, round(base[1]) + dy))
                if e is not None and np.linalg.norm(mids[e] - pt) < 10 * tol:
                    return e
        return None

    partner = {}
    shift_of = {}
    for e in boundary:
        if e in partner:
            continue
        for s in shifts:
            m = find(mids[e] + s)
            if m is not None and m != e:
                partner[e] = m
                partner[m] = e
                shift_of[e] = np.array(s)
                shift_of[m] = -np.array(s)
                break
        else:
            raise MeshError(f"boundary edge {e} has no periodic partner")

    for e, m in partner.items():
        if abs(np.linalg.norm(vertices[edge_vertices[e, 0]]
                              - vertices[edge_vertices[e, 1]])
               - np.linalg.norm(vertices[edge_vertices[m, 0]]
                                - vertices[edge_vertices[m, 1]])) > 1e-12 * (1 + abs(Lx) + abs(Ly)):
            raise MeshError("periodic partner edges differ in length")

    # keep the lower-index edge of each pair, absorb the partner
    keep = np.ones(len(edge_vertices), dtype=bool)
    for e, m in partner.items():
        if e < m:
            edge_right[e] = edge_left[m]
            edge_tags[e] = TAG_PERIODIC
            edge_shifts[e] = shift_of[e]
            keep[m] = False
            cell_edges[cell_edges == m] = e

    remap = np.cumsum(keep) - 1
    cell_edges = remap[cell_edges]
    return (edge_vertices[keep], edge_left[keep], edge_right[keep],
            edge_tags[keep], edge_shifts[keep], cell_edges)


# ---------------------------------------------------------------------------
# generators

def generate_structured(nx: int, ny: int,
                        domain: tuple[float, float, float, float] = (0.0, 1.0, 0.0, 1.0),
                        pattern: str = "uniform",
                        periodic: bool = False) -> TriMesh:
    """Structured triangulation of a rectangle.

    ``uniform`` splits each grid quad into two right triangles along the
    bottom-left/top-right diagonal.  ``obtuse`` additionally shears every
    other vertex row so that each triangle's largest angle is exactly
    3*pi/5 while no triangle degenerates.
    """
    if nx < 2 or ny < 2:
        raise ValueError("nx, ny must be at least 2")
    x0, x1, y0, y1 = domain
    hx = (x1 - x0) / nx
    hy = (y1 - y0) / ny
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    verts = np.stack([X.ravel(), Y.ravel()], axis=1)

    def vid(i, j):
        return i * (ny + 1) + j

    if pattern == "obtuse":
        # Row-alternating shear of tan(18 deg) * hx: every triangle becomes
        # congruent with maximum angle exactly 3*pi/5 and minimum angle
        # about 35 deg, so the family is self-similar under refinement.
        if periodic and ny % 2 != 0:
            raise ValueError("obtuse periodic pattern needs even ny")
        shear = math.tan(math.radians(18.0)) * hx
        for j in range(1, ny + 1, 2):
            for i in range(nx + 1):
                verts[vid(i, j), 0] += shear
    elif pattern != "uniform":
        raise ValueError(f"unknown pattern {pattern!r}")

    cells = []
    for i in range(nx):
        for j in range(ny):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            cells.append((v00, v11, v01))
            cells.append((v00, v10, v11))
    periods = (x1 - x0, y1 - y0) if periodic else None
    mesh = build_mesh(verts, np.array(cells), periods=periods)
    return mesh


def _staggered_base(nx: int, ny: int, domain):
    """Planar staggered triangulation (near-equilateral cells).

    Odd rows are shifted right by half a cell; both vertical boundaries
    zigzag identically so periodic pairing by translation still applies.
    ``ny`` must be even for periodic use.
    """
    x0, x1, y0, y1 = domain
    hx = (x1 - x0) / nx
    hy = (y1 - y0) / ny
    verts = np.empty(((nx + 1) * (ny + 1), 2))

    def vid(i, j):
        return j * (nx + 1) + i

    for j in range(ny + 1):
        off = 0.5 * hx * (j % 2)
        for i in range(nx + 1):
            verts[vid(i, j)] = (x0 + i * hx + off, y0 + j * hy)
    cells = []
    for j in range(ny):
        for i in range(nx):
            lo0, lo1 = vid(i, j), vid(i + 1, j)
            up0, up1 = vid(i, j + 1), vid(i + 1, j + 1)
            if j % 2 == 0:     # upper row shifted right
                cells.append((lo0, lo1, up0))
                cells.append((lo1, up1, up0))
            else:              # lower row shifted right
                cells.append((lo0, lo1, up1))
                cells.append((lo0, up1, up0))
    return verts, np.array(cells)


def generate_perturbed(nx: int, ny: int, rng: np.random.Generator,
                       domain=(0.0, 1.0, 0.0, 1.0), amplitude: float = 0.12,
                       periodic: bool = True, min_angle_deg: float = 30.0,
                       max_angle_deg: float = 85.0,
                       max_tries: int = 400) -> TriMesh:
    """Random admissible mesh with every angle strictly acute.

    Starts from a staggered near-equilateral triangulation, jitters the
    interior vertices, and rejects draws until all angles fall inside
    [min_angle, max_angle].
    """
    if periodic and ny % 2 != 0:
        raise ValueError("periodic staggered meshes need even ny")
    x0, x1, y0, y1 = domain
    hx = (x1 - x0) / nx
    hy = (y1 - y0) / ny
    lo = math.radians(min_angle_deg)
    hi = math.radians(max_angle_deg)
    verts0, cells = _staggered_base(nx, ny, domain)
    interior = ((verts0[:, 1] > y0 + 0.5 * hy) & (verts0[:, 1] < y1 - 0.5 * hy)
                & (verts0[:, 0] > x0 + 0.6 * hx)
                & (verts0[:, 0] < x1 - 0.1 * hx))
    ii, jj = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), indexing="ij")
    for _ in range(max_tries):
        verts = verts0.copy()
        if periodic:
            # jitter every vertex; periodic copies share one displacement so
            # translation pairing of the boundary edges stays exact
            torus = rng.uniform(-amplitude, amplitude, size=(nx, ny, 2))
            jit = torus[ii % nx, jj % ny]          # (nx+1, ny+1, 2)
            verts += jit.transpose(1, 0, 2).reshape(-1, 2) * [hx, hy]
        else:
            jit = rng.uniform(-amplitude, amplitude, size=(len(verts), 2))
            verts[interior] += jit[interior] * [hx, hy]
        try:
            mesh = build_mesh(verts, cells,
                              periods=(x1 - x0, y1 - y0) if periodic else None)
        except MeshError:
            continue
        if mesh.theta_min >= lo and mesh.theta_max <= hi:
            return mesh
    raise MeshError("could not generate an admissible mesh within max_tries")


# ---------------------------------------------------------------------------
# file I/O

def save_mesh(mesh: TriMesh, path) -> None:
    """Write the plain-text mesh format (1-based indices)."""
    with open(path, "w") as f:
        f.write(f"vertices {mesh.n_vertices}\n")
        for x, y in mesh.vertices:
            f.write(f"{float(x)!r} {float(y)!r}\n")
        f.write(f"cells {mesh.n_cells}\n")
        for a, b, c in mesh.cells:
            f.write(f"{a + 1} {b + 1} {c + 1}\n")
        if mesh.periods is not None:
            f.write(f"periodic {float(mesh.periods[0])!r} "
                    f"{float(mesh.periods[1])!r}\n")


def load_mesh(path) -> TriMesh:
    """Read the plain-text mesh format and rebuild all adjacency."""
    with open(path) as f:
        tokens = [ln.split() for ln in f if ln.strip() and not ln.startswith("#")]
    it = iter(tokens)
    try:
        head = next(it)
        if head[0] != "vertices":
            raise MeshError("expected 'vertices' header")
        nv = int(head[1])
        verts = np.array([[float(v) for v in next(it)] for _ in range(nv)])
        head = next(it)
        if head[0] != "cells":
            raise MeshError("expected 'cells' header")
        nc = int(head[1])
        cells = np.array([[int(v) - 1 for v in next(it)] for _ in range(nc)])
        periods = None
        for rest in it:
            if rest[0] == "periodic":
                periods = (float(rest[1]), float(rest[2]))
    except StopIteration as exc:
        raise MeshError("truncated mesh file") from exc
    return build_mesh(verts, cells, periods=periods)


# ---------------------------------------------------------------------------
# geometry checks

def geometry_ratio_bound(mesh: TriMesh) -> float:
    """max over interior edges and 2-point Gauss points of l_e * C sin(theta_min) / h.

    Values <= 1 certify the edge-length/stencil-depth inequality the nonlinear
    step-size bound relies on.
    """
    C = (3.0 - math.sqrt(3.0)) / 6.0
    interior = mesh.edge_right >= 0
    if not interior.any():
        interior = np.ones(mesh.n_edges, dtype=bool)
    idx = np.where(interior)[0]
    ea = mesh.vertices[mesh.edge_vertices[idx, 0]]
    eb = mesh.vertices[mesh.edge_vertices[idx, 1]]
    g = 0.5 / math.sqrt(3.0)
    pts = np.stack([ea + (0.5 - g) * (eb - ea), ea + (0.5 + g) * (eb - ea)], axis=1)
    dirs = np.repeat(mesh.edge_normals[idx][:, None, :], 2, axis=1)
    # restrict the helper arrays to the selected edges
    sub = _SubEdgeView(mesh, idx)
    h = edge_scales_along(sub, pts, dirs)
    ratio = mesh.edge_lengths[idx][:, None] * C * math.sin(mesh.theta_min) / h
    return float(ratio.max())


class _SubEdgeView:
    """Minimal adapter exposing a subset of edges to ``edge_scales_along``."""

    def __init__(self, mesh: TriMesh, idx: np.ndarray):
        self._mesh = mesh
        self._idx = idx
        self.edge_right = mesh.edge_right[idx]
        self.edge_shifts = mesh.edge_shifts[idx]
        self.n_edges = len(idx)
        self._cache = {}

    def other_edge_endpoints(self, cell_index, e_local):
        return self._mesh.other_edge_endpoints(cell_index, int(self._idx[e_local]))

    @property
    def edge_left(self):
        return self._mesh.edge_left[self._idx]
