"""Quadrature rules.

Conventions
-----------
* Triangle rules are stored in barycentric coordinates with weights
  normalized to the *cell average*: sum(weights) == 1, so
  (1/|K|) integral_K f = sum_q w_q f(x_q) for f up to the stated degree.
* Edge rules are one-dimensional.  ``gauss_2``/``gauss_3`` live on [0, 1];
  ``gauss_lobatto_3``/``gauss_radau_3`` live on [-1/2, 1/2] exactly as
  tabulated.  All edge weights sum to 1, i.e. they compute the average over
  their interval; the ``nodes01`` property gives the nodes mapped affinely
  to [0, 1] for use as edge parameters.
* ``mapped_vertex_rule`` is the vertex-including triangle rule built by
  pushing a Gauss-Lobatto x Gauss-Radau tensor rule on the square through
  three degenerate projections onto the triangle; it is exact for
  quadratics, includes the 3 vertices (weight 2/81 each) and the 3 edge
  midpoints, and has nonnegative weights.
* ``selected_point_rule`` composes, per edge, sub-triangle applications of
  the vertex rule and the edge-midpoint rule around the interior
  normal-line point, producing a cell-average rule whose points include the
  12 edge-stencil points (3 vertices, 3 edge midpoints, and the two
  normal-line points of each edge).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def _cross2(a, b):
    """z-component of the cross product of 2-vectors (NumPy 2 removed 2D cross)."""
    a = np.asarray(a)
    b = np.asarray(b)
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]

from .mesh import TriMesh, edge_length_scale

SQRT6 = math.sqrt(6.0)
SQRT15 = math.sqrt(15.0)
W1_VERTEX = 2.0 / 81.0  # vertex weight of the mapped vertex rule


@dataclass(frozen=True)
class QuadRule:
    """Cell-average triangle rule: barycentric points, weights sum to 1."""

    points: np.ndarray   # (nq, 3)
    weights: np.ndarray  # (nq,)
    degree: int

    def average(self, values: np.ndarray) -> float:
        return float(self.weights @ values)


@dataclass(frozen=True)
class EdgeRule:
    """1D rule; ``interval`` documents the native node coordinates."""

    nodes: np.ndarray
    weights: np.ndarray  # sum to 1 (interval average)
    degree: int
    interval: tuple = (0.0, 1.0)

    @property
    def nodes01(self) -> np.ndarray:
        lo, hi = self.interval
        return (self.nodes - lo) / (hi - lo)

    def integrate(self, f) -> float:
        """Average of f over the native interval (exact to ``degree``)."""
        return float(self.weights @ f(self.nodes)) / 1.0


# ---------------------------------------------------------------------------
# standard rules

def triangle_rule(degree: int) -> QuadRule:
    """Symmetric triangle rules, exact to the requested polynomial degree."""
    if degree == 2:
        pts = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])
        wts = np.full(3, 1 / 3)
    elif degree == 4:
        a1, w1 = 0.445948490915965, 0.223381589678011
        a2, w2 = 0.091576213509771, 0.109951743655322
        pts = np.array([_orbit(a1), _orbit(a2)]).reshape(6, 3)
        wts = np.array([w1] * 3 + [w2] * 3)
    elif degree == 5:
        a1 = (6 + SQRT15) / 21
        a2 = (6 - SQRT15) / 21
        w1 = (155 + SQRT15) / 1200
        w2 = (155 - SQRT15) / 1200
        pts = np.vstack([[[1 / 3, 1 / 3, 1 / 3]], _orbit(a1), _orbit(a2)])
        wts = np.array([9 / 40] + [w1] * 3 + [w2] * 3)
    else:
        raise ValueError(f"unsupported triangle rule degree: {degree}")
    return QuadRule(pts, wts, degree)


def _orbit(a: float) -> np.ndarray:
    b = 1.0 - 2.0 * a
    return np.array([[b, a, a], [a, b, a], [a, a, b]])


def gauss_2() -> EdgeRule:
    d = 0.5 / math.sqrt(3.0)
    return EdgeRule(np.array([0.5 - d, 0.5 + d]), np.array([0.5, 0.5]),
                    degree=3, interval=(0.0, 1.0))


def gauss_3() -> EdgeRule:
    d = 0.5 * math.sqrt(0.6)
    return EdgeRule(np.array([0.5 - d, 0.5, 0.5 + d]),
                    np.array([5 / 18, 8 / 18, 5 / 18]),
                    degree=5, interval=(0.0, 1.0))


def gauss_lobatto_3() -> EdgeRule:
    return EdgeRule(np.array([-0.5, 0.0, 0.5]),
                    np.array([1 / 6, 2 / 3, 1 / 6]),
                    degree=3, interval=(-0.5, 0.5))


def gauss_radau_3() -> EdgeRule:
    return EdgeRule(np.array([-0.5, (1 - SQRT6) / 10, (1 + SQRT6) / 10]),
                    np.array([1 / 9, (16 + SQRT6) / 36, (16 - SQRT6) / 36]),
                    degree=4, interval=(-0.5, 0.5))


# ---------------------------------------------------------------------------
# vertex-including rule (Gauss-Lobatto x Gauss-Radau through projections)

def _mapped_vertex_rule_bary() -> tuple[np.ndarray, np.ndarray]:
    gl = gauss_lobatto_3()
    gr = gauss_radau_3()
    pts: list[np.ndarray] = []
    wts: list[float] = []
    for i in range(3):
        for b, (v, wv) in enumerate(zip(gr.nodes, gr.weights)):
            for a, (u, wu) in enumerate(zip(gl.nodes, gl.weights)):
                lam = np.zeros(3)
                lam[i] = 0.5 + v
                lam[(i + 1) % 3] = (0.5 + u) * (0.5 - v)
                lam[(i + 2) % 3] = (0.5 - u) * (0.5 - v)
                pts.append(lam)
                wts.append((2 / 3) * (0.5 - v) * wu * wv)
    # merge coincident images (each vertex arises from two projections)
    merged: dict[tuple, int] = {}
    out_p: list[np.ndarray] = []
    out_w: list[float] = []
    for lam, w in zip(pts, wts):
        key = tuple(np.round(lam, 12))
        if key in merged:
            out_w[merged[key]] += w
        else:
            merged[key] = len(out_p)
            out_p.append(lam)
            out_w.append(w)
    return np.array(out_p), np.array(out_w)


_MVR_POINTS, _MVR_WEIGHTS = _mapped_vertex_rule_bary()
_MVR = QuadRule(_MVR_POINTS, _MVR_WEIGHTS, degree=2)


def mapped_vertex_rule(mesh: TriMesh | None = None,
                       cell: int | None = None) -> QuadRule:
    """Quadratic-exact cell-average rule containing vertices and midpoints.

    In barycentric form the rule is the same for every clockwise triangle,
    so the mesh/cell arguments are optional.
    """
    return _MVR


# ---------------------------------------------------------------------------
# selected-point composition

# local stencil layout for the 12 selected points of a cell:
#   0..2   : the three cell vertices (local order)
#   3..5   : midpoints of local edges 0..2 (edge j joins vertices j, j+1)
#   6..11  : per local edge j, the half-normal point x4 (6 + 2j) and the
#            full-normal point x5 (7 + 2j) on the inward edge normal
N_SELECTED = 12


def selected_points(mesh: TriMesh, cell: int) -> np.ndarray:
    """Physical coordinates of the 12 edge-stencil points of a cell."""
    verts = mesh.cell_vertices(cell)
    pts = np.empty((N_SELECTED, 2))
    pts[0:3] = verts
    for j in range(3):
        e = int(mesh.cell_edges[cell, j])
        mid = 0.5 * (verts[j] + verts[(j + 1) % 3])
        pts[3 + j] = mid
        n_in = -mesh.outward_sign(e, cell) * mesh.edge_normals[e]
        # measure from the stored (left-copy) midpoint so periodic shifts
        # are handled uniformly; distances are translation invariant
        h = edge_length_scale(mesh, e, mesh.edge_normals[e],
                              mesh.edge_midpoints[e])
        x5 = mid + h * n_in
        pts[6 + 2 * j] = 0.5 * (mid + x5)
        pts[7 + 2 * j] = x5
    return pts


def _fan_triangles(verts: np.ndarray, j: int, x5: np.ndarray,
                   area_tol: float) -> list[np.ndarray]:
    """Sub-triangles of the cell fanned around x5 for local edge j.

    The cell boundary is traversed as A, mid(AB), B, C (A, B the edge
    endpoints, C the opposite vertex); degenerate fan triangles (x5 on an
    edge, or x5 at C) are dropped.
    """
    a = verts[j]
    b = verts[(j + 1) % 3]
    c = verts[(j + 2) % 3]
    mid = 0.5 * (a + b)
    loop = [a, mid, b, c]
    tris = []
    for k in range(4):
        p, q = loop[k], loop[(k + 1) % 4]
        area = 0.5 * abs(_cross2(q - p, x5 - p))
        if area > area_tol:
            tris.append(np.array([p, q, x5]))
    return tris


def selected_point_rule(mesh: TriMesh, cell: int) -> tuple[np.ndarray,
                                                           np.ndarray]:
    """Full composite cell-average rule (physical points, weights).

    For each edge the cell is split into a fan of sub-triangles around that
    edge's full-normal point x5; on every sub-triangle both the
    vertex-including rule and the edge-midpoint rule are applied, each
    scaled by (1/6) * area fraction, so each edge contributes 1/3 of the
    cell average and the total weight is 1.
    """
    verts = mesh.cell_vertices(cell)
    cell_area = mesh.areas[cell]
    area_tol = 1e-12 * cell_area
    midrule_pts = triangle_rule(2).points  # the 3 edge midpoints
    pts_out: list[np.ndarray] = []
    wts_out: list[float] = []
    sel = selected_points(mesh, cell)
    for j in range(3):
        x5 = sel[7 + 2 * j]
        for tri in _fan_triangles(verts, j, x5, area_tol):
            # orient clockwise for the mapped vertex rule
            if _cross2(tri[1] - tri[0], tri[2] - tri[0]) > 0:
                tri = tri[::-1]
            t_area = 0.5 * abs(_cross2(tri[1] - tri[0], tri[2] - tri[0]))
            scale = (1 / 6) * (t_area / cell_area)
            pts_out.append(_MVR_POINTS @ tri)
            wts_out.append(scale * _MVR_WEIGHTS)
            pts_out.append(midrule_pts @ tri)
            wts_out.append(scale * np.full(3, 1 / 3))
    return np.vstack(pts_out), np.concatenate(wts_out)


def selected_point_weights(mesh: TriMesh, cell: int,
                           selected: np.ndarray | None = None) -> np.ndarray:
    """Total weight the composite rule assigns to each of the 12 points.

    Every weight is strictly positive; the full-normal points carry weight
    exactly (2/81)/6 and the vertex/midpoint weights are bounded below by
    (2/81)/6 * tan(theta_min) * cot(theta_max) of the mesh.
    """
    if selected is None:
        selected = selected_points(mesh, cell)
    else:
        selected = np.asarray(selected, dtype=float)
        if selected.shape != (N_SELECTED, 2):
            raise ValueError("expected 12 selected points")
        ref = selected_points(mesh, cell)
        if not np.allclose(selected, ref, atol=1e-8 * mesh.diameters[cell]):
            raise ValueError(
                "selected points inconsistent with mesh geometry")
    pts, wts = selected_point_rule(mesh, cell)
    tol = 1e-9 * mesh.diameters[cell]
    d2 = ((pts[None, :, :] - selected[:, None, :]) ** 2).sum(axis=2)
    hit = d2 <= tol * tol
    return (hit * wts[None, :]).sum(axis=1)


def min_selected_weight(mesh: TriMesh) -> float:
    """Minimum selected-point weight over all cells (the CFL weight w0)."""
    w0 = math.inf
    for c in range(mesh.n_cells):
        w0 = min(w0, float(selected_point_weights(mesh, c).min()))
    return w0


# ---------------------------------------------------------------------------
# verification suite

def verification_suite(rng: np.random.Generator, n_triangles: int = 1000,
                       n_weight_configs: int = 100) -> dict:
    """End-to-end check of the vertex rule and the selected-point weights.

    Part one integrates all six quadratic monomials with the mapped vertex
    rule on random triangles against the (independently exact) midpoint
    rule.  Part two computes the 12 stencil weights on random perturbed
    meshes and checks positivity and the angle-dependent lower bounds:
    vertex/midpoint weights >= (w1/6) tan(theta_min) cot(theta_max),
    half-normal points >= (1/18) tan(theta_min) cot(theta_max), and
    full-normal points carry exactly w1/6.
    """
    from .mesh import generate_perturbed

    def monomials(p):
        x, y = p[..., 0], p[..., 1]
        return np.stack([np.ones_like(x), x, y, x * x, x * y, y * y], axis=-1)

    mid = triangle_rule(2)
    max_err = 0.0
    done = 0
    while done < n_triangles:
        tri = rng.uniform(0.0, 1.0, size=(3, 2))
        area = 0.5 * abs(_cross2(tri[1] - tri[0], tri[2] - tri[0]))
        if area < 0.02:
            continue
        approx = _MVR_WEIGHTS @ monomials(_MVR_POINTS @ tri)
        exact = mid.weights @ monomials(mid.points @ tri)
        max_err = max(max_err, float(np.abs(approx - exact).max()))
        done += 1

    vert_rows = np.where((_MVR_POINTS == 1.0).any(axis=1))[0]
    vertex_exact = (len(vert_rows) == 3
                    and all(_MVR_WEIGHTS[r] == W1_VERTEX for r in vert_rows))

    w_floor = W1_VERTEX / 6.0
    min_w = math.inf
    all_pos = True
    bounds_ok = True
    checked = 0
    seed_base = int(rng.integers(1 << 30))
    mesh_no = 0
    while checked < n_weight_configs:
        mesh = generate_perturbed(6, 6, np.random.default_rng(seed_base
                                                              + mesh_no))
        mesh_no += 1
        ratio = math.tan(mesh.theta_min) / math.tan(mesh.theta_max)
        cells = rng.choice(mesh.n_cells,
                           size=min(10, n_weight_configs - checked),
                           replace=False)
        for c in cells:
            w = selected_point_weights(mesh, int(c))
            min_w = min(min_w, float(w.min()))
            all_pos &= bool((w > 0).all())
            tol = 1e-12
            bounds_ok &= bool((w[0:6] >= w_floor * ratio - tol).all())
            bounds_ok &= bool((w[[6, 8, 10]] >= ratio / 18.0 - tol).all())
            bounds_ok &= bool((np.abs(w[[7, 9, 11]] - w_floor) <= tol).all())
            checked += 1

    passed = (max_err <= 1e-13 and vertex_exact and all_pos and bounds_ok)
    return dict(mapped_rule_max_error=max_err,
                vertex_weight_exact=vertex_exact,
                selected_weights_min=min_w,
                selected_weights_all_positive=all_pos,
                lower_bounds_satisfied=bounds_ok,
                passed=passed)
