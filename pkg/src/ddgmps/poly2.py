"""Per-cell quadratic polynomials in a barycentric monomial basis.

Every cell polynomial is stored as six coefficients in the fixed local basis
{1, xi, eta, xi^2, xi*eta, eta^2}, where (xi, eta) are the first two
barycentric coordinates of the owning triangle.  The basis is shared by all
cells, so the (average-normalized) local mass matrix is a single constant
6x6 matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import TriMesh

N_BASIS = 6

# cell average of each basis function: 1/|K| * integral over K
AVG_WEIGHTS = np.array([1.0, 1 / 3, 1 / 3, 1 / 6, 1 / 12, 1 / 6])


def _moment(a: int, b: int, c: int) -> float:
    """Average of xi^a eta^b zeta^c over the triangle."""
    import math
    return (2.0 * math.factorial(a) * math.factorial(b) * math.factorial(c)
            / math.factorial(a + b + c + 2))


_EXPONENTS = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]


def mass_matrix() -> np.ndarray:
    """Average-normalized local mass matrix: M[k,l] = avg(B_k * B_l)."""
    M = np.empty((N_BASIS, N_BASIS))
    for k, (a1, b1) in enumerate(_EXPONENTS):
        for l, (a2, b2) in enumerate(_EXPONENTS):
            M[k, l] = _moment(a1 + a2, b1 + b2, 0)
    return M


MASS = mass_matrix()
MASS_INV = np.linalg.inv(MASS)


def basis_values(xi: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """Basis values at barycentric points; output shape xi.shape + (6,)."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    return np.stack([np.ones_like(xi), xi, eta, xi * xi, xi * eta, eta * eta],
                    axis=-1)


def basis_bary_gradients(xi: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """d(basis)/d(xi, eta) at barycentric points; shape xi.shape + (6, 2)."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    z = np.zeros_like(xi)
    o = np.ones_like(xi)
    dxi = np.stack([z, o, z, 2 * xi, eta, z], axis=-1)
    deta = np.stack([z, z, o, z, xi, 2 * eta], axis=-1)
    return np.stack([dxi, deta], axis=-1)


@dataclass
class QuadraticPoly:
    """One quadratic polynomial tied to a cell of a mesh."""

    coeffs: np.ndarray  # (6,)

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (N_BASIS,):
            raise ValueError("QuadraticPoly needs exactly 6 coefficients")

    def average(self) -> float:
        return float(self.coeffs @ AVG_WEIGHTS)


@dataclass
class DGField:
    """Piecewise-quadratic DG solution: one coefficient row per cell."""

    coeffs: np.ndarray       # (nc, 6)
    time_stamp: float = 0.0

    def copy(self) -> "DGField":
        return DGField(self.coeffs.copy(), self.time_stamp)

    def averages(self) -> np.ndarray:
        return self.coeffs @ AVG_WEIGHTS

    def poly(self, i: int) -> QuadraticPoly:
        return QuadraticPoly(self.coeffs[i])


def cell_basis_hessians(mesh: TriMesh) -> np.ndarray:
    """Physical Hessians of the 6 basis functions per cell, (nc, 6, 2, 2).

    Only the three quadratic basis functions have nonzero Hessians; cached
    on the mesh because they are geometry-only.
    """
    key = "basis_hessians"
    if key in mesh._cache:
        return mesh._cache[key]
    g = mesh.bary_grads  # (nc, 3, 2); rows 0,1 are grad xi, grad eta
    H = np.zeros((mesh.n_cells, N_BASIS, 2, 2))
    gx, ge = g[:, 0], g[:, 1]
    H[:, 3] = 2.0 * gx[:, :, None] * gx[:, None, :]
    H[:, 4] = (gx[:, :, None] * ge[:, None, :]
               + ge[:, :, None] * gx[:, None, :])
    H[:, 5] = 2.0 * ge[:, :, None] * ge[:, None, :]
    mesh._cache[key] = H
    return H


def barycentric(mesh: TriMesh, cell: int, points: np.ndarray) -> np.ndarray:
    """(xi, eta) of physical points w.r.t. a cell; extrapolation allowed."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    verts = mesh.cell_vertices(cell)
    g = mesh.bary_grads[cell]  # (3, 2)
    rel = points - verts[2]    # zeta = 1 at vertex 3; xi, eta vanish there
    xi = rel @ g[0]
    eta = rel @ g[1]
    return np.stack([xi, eta], axis=-1)


def evaluate(p: QuadraticPoly, mesh: TriMesh, cell: int, point) -> float:
    """Exact value of the polynomial at any point in the plane."""
    be = barycentric(mesh, cell, np.asarray(point, dtype=float))
    vals = basis_values(be[..., 0], be[..., 1]) @ p.coeffs
    return float(vals[0]) if vals.shape == (1,) else vals


def gradient(p: QuadraticPoly, mesh: TriMesh, cell: int, point) -> np.ndarray:
    """Physical gradient at a point."""
    be = barycentric(mesh, cell, np.asarray(point, dtype=float))[0]
    db = basis_bary_gradients(be[0], be[1])       # (6, 2)
    gb = db.T @ p.coeffs                          # (2,) d/dxi, d/deta
    g = mesh.bary_grads[cell]
    return gb[0] * g[0] + gb[1] * g[1]


def hessian(p: QuadraticPoly, mesh: TriMesh, cell: int) -> np.ndarray:
    """Constant physical Hessian of the quadratic."""
    g = mesh.bary_grads[cell]
    gx, ge = g[0], g[1]
    c = p.coeffs
    return (2 * c[3] * np.outer(gx, gx)
            + c[4] * (np.outer(gx, ge) + np.outer(ge, gx))
            + 2 * c[5] * np.outer(ge, ge))


def directional_derivatives(p: QuadraticPoly, mesh: TriMesh, cell: int,
                            point, direction) -> tuple[float, float]:
    """(grad u . d, d^T Hess u d) for an arbitrary nonzero direction d."""
    d = np.asarray(direction, dtype=float)
    if not np.any(d):
        raise ValueError("zero direction")
    u_d = float(gradient(p, mesh, cell, point) @ d)
    u_dd = float(d @ hessian(p, mesh, cell) @ d)
    return u_d, u_dd


def l2_project(f, mesh: TriMesh, cell: int, volume_rule) -> QuadraticPoly:
    """L2 projection of a scalar function onto the cell's quadratic space.

    ``volume_rule`` must be exact for degree >= 4 so that the projection
    reproduces quadratics exactly.
    """
    pts_b = volume_rule.points  # (nq, 3) barycentric
    verts = mesh.cell_vertices(cell)
    phys = pts_b @ verts
    fv = np.asarray(f(phys[:, 0], phys[:, 1]), dtype=float)
    B = basis_values(pts_b[:, 0], pts_b[:, 1])
    b = (volume_rule.weights[:, None] * B * fv[:, None]).sum(axis=0)
    return QuadraticPoly(MASS_INV @ b)


def project_field(f, mesh: TriMesh, volume_rule, time: float = 0.0) -> DGField:
    """Vectorized L2 projection over all cells."""
    pts_b = volume_rule.points
    B = basis_values(pts_b[:, 0], pts_b[:, 1])          # (nq, 6)
    phys = np.einsum("qk,nkd->nqd", pts_b, mesh.vertices[mesh.cells])
    fv = np.asarray(f(phys[..., 0], phys[..., 1]), dtype=float)
    b = np.einsum("q,qk,nq->nk", volume_rule.weights, B, fv)
    return DGField(b @ MASS_INV.T, time)


# ---------------------------------------------------------------------------
# exact extrema

# quadratic restriction of the basis to the three edges, as matrices taking
# the 6 coefficients to (a, b, c) with p(t) = a t^2 + b t + c, t in [0, 1]:
#   edge 0: vertex1 -> vertex2, (xi, eta) = (1 - t, t)
#   edge 1: vertex2 -> vertex3, (xi, eta) = (0, 1 - t)
#   edge 2: vertex3 -> vertex1, (xi, eta) = (t, 0)
_EDGE_RESTRICTIONS = np.array([
    [[0, 0, 0, 1, -1, 1],
     [0, -1, 1, -2, 1, 0],
     [1, 1, 0, 1, 0, 0]],
    [[0, 0, 0, 0, 0, 1],
     [0, 0, -1, 0, 0, -2],
     [1, 0, 1, 0, 0, 1]],
    [[0, 0, 0, 1, 0, 0],
     [0, 1, 0, 0, 0, 0],
     [1, 0, 0, 0, 0, 0]],
], dtype=float)

_VERTEX_BASIS = basis_values(np.array([1.0, 0.0, 0.0]),
                             np.array([0.0, 1.0, 0.0]))  # (3, 6)

_HESS_DET_TOL = 1e-14


def extrema_coeffs(coeffs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exact (min, max) over the closed reference triangle, vectorized.

    Candidates: the 3 vertices, interior stationary points of the edge
    restrictions, and the interior stationary point of the full quadratic
    when the Hessian is nonsingular.
    """
    c = np.atleast_2d(np.asarray(coeffs, dtype=float))
    vals = [c @ _VERTEX_BASIS.T]                        # (n, 3)

    abc = np.einsum("eij,nj->nei", _EDGE_RESTRICTIONS, c)  # (n, 3 edges, 3)
    a, b = abc[..., 0], abc[..., 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = -b / (2 * a)
    inside = np.isfinite(t) & (t > 0.0) & (t < 1.0)
    ts = np.where(inside, t, 0.5)
    ev = np.where(inside, a * ts * ts + b * ts + abc[..., 2], np.nan)
    vals.append(ev)

    det = 4 * c[:, 3] * c[:, 5] - c[:, 4] ** 2
    scale = np.abs(c).max(axis=1) + 1e-300
    ok = np.abs(det) > _HESS_DET_TOL * scale**2
    safe = np.where(ok, det, 1.0)
    # solve [2c3 c4; c4 2c5] [xi eta]^T = [-c1 -c2]^T by Cramer's rule
    xi = (-c[:, 1] * 2 * c[:, 5] - (-c[:, 2]) * c[:, 4]) / safe
    eta = (2 * c[:, 3] * (-c[:, 2]) - c[:, 4] * (-c[:, 1])) / safe
    interior = ok & (xi > 0) & (eta > 0) & (xi + eta < 1)
    pv = (c[:, 0] + c[:, 1] * xi + c[:, 2] * eta + c[:, 3] * xi**2
          + c[:, 4] * xi * eta + c[:, 5] * eta**2)
    vals.append(np.where(interior, pv, np.nan)[:, None])

    allv = np.concatenate(vals, axis=1)
    return np.nanmin(allv, axis=1), np.nanmax(allv, axis=1)


def extrema_on_cell(p: QuadraticPoly, mesh: TriMesh | None = None,
                    cell: int | None = None) -> tuple[float, float]:
    """Exact (m_K, M_K) of the polynomial over its closed triangle.

    The extrema are invariant under the affine barycentric chart, so the
    mesh/cell arguments are accepted for interface symmetry but unused.
    """
    lo, hi = extrema_coeffs(p.coeffs[None, :])
    return float(lo[0]), float(hi[0])


def cell_average(p: QuadraticPoly) -> float:
    return p.average()
