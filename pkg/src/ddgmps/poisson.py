"""Continuous P2 finite-element Poisson solver for the stream function.

Solves Delta(phi) = w on a periodically paired triangular mesh with
quadratic Lagrange elements (nodes at vertices and edge midpoints), a
hand-rolled diagonally preconditioned conjugate-gradient iteration, and a
mean-zero gauge for the constant nullspace.  The induced velocity field
(-phi_y, phi_x) has a single-valued normal component on every edge, which
is what the DG convection flux consumes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import poly2
from .mesh import TriMesh
from .poly2 import DGField
from .quadrature import triangle_rule


class PoissonError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# quadratic Lagrange shape functions in barycentric coordinates
# local nodes: vertices 0,1,2 then midpoints of edges (0-1), (1-2), (2-0)

def _shape_values(lam: np.ndarray) -> np.ndarray:
    """Shape values at barycentric points lam (..., 3) -> (..., 6)."""
    l0, l1, l2 = lam[..., 0], lam[..., 1], lam[..., 2]
    return np.stack([l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
                     4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0], axis=-1)


def _shape_bary_gradients(lam: np.ndarray) -> np.ndarray:
    """d(shape)/d(lambda_i) at barycentric points -> (..., 6, 3)."""
    l0, l1, l2 = lam[..., 0], lam[..., 1], lam[..., 2]
    z = np.zeros_like(l0)
    rows = [
        np.stack([4 * l0 - 1, z, z], axis=-1),
        np.stack([z, 4 * l1 - 1, z], axis=-1),
        np.stack([z, z, 4 * l2 - 1], axis=-1),
        np.stack([4 * l1, 4 * l0, z], axis=-1),
        np.stack([z, 4 * l2, 4 * l1], axis=-1),
        np.stack([4 * l2, z, 4 * l0], axis=-1),
    ]
    return np.stack(rows, axis=-2)


# ---------------------------------------------------------------------------
# node space

@dataclass
class C0Space:
    """Global quadratic Lagrange node space with periodic identification.

    ``cell_nodes[c]`` lists the six global node ids of cell ``c`` in local
    order; periodic copies of a vertex share one id, and each (merged) edge
    carries exactly one midpoint node.
    """

    mesh: TriMesh
    n_nodes: int
    cell_nodes: np.ndarray       # (nc, 6)
    vertex_node: np.ndarray      # (nv,) node id of each mesh vertex
    edge_node: np.ndarray        # (ne,) node id of each edge midpoint
    node_coords: np.ndarray      # (n_nodes, 2) representative coordinates
    boundary_mask: np.ndarray    # (n_nodes,) nodes on non-periodic boundary


def build_space(mesh: TriMesh) -> C0Space:
    nv = mesh.n_vertices
    ne = mesh.n_edges
    verts = mesh.vertices

    if mesh.periods is not None:
        Lx, Ly = mesh.periods
        origin = verts.min(axis=0)
        canon = verts - origin
        tol = 1e-8 * max(Lx or 1.0, Ly or 1.0)
        for d, L in enumerate((Lx, Ly)):
            if L:
                canon[:, d] = canon[:, d] % L
                canon[np.abs(canon[:, d] - L) < tol, d] = 0.0
        keys = np.round(canon / tol).astype(np.int64)
        groups: dict[tuple[int, int], int] = {}
        rep = np.empty(nv, dtype=np.int64)
        for v in range(nv):
            k = (int(keys[v, 0]), int(keys[v, 1]))
            rep[v] = groups.setdefault(k, v)
    else:
        rep = np.arange(nv)

    uniq, vertex_node = np.unique(rep, return_inverse=True)
    n_vert_nodes = len(uniq)
    edge_node = n_vert_nodes + np.arange(ne)
    n_nodes = n_vert_nodes + ne

    cell_nodes = np.empty((mesh.n_cells, 6), dtype=np.int64)
    cell_nodes[:, 0:3] = vertex_node[mesh.cells]
    cell_nodes[:, 3:6] = edge_node[mesh.cell_edges]

    coords = np.empty((n_nodes, 2))
    coords[:n_vert_nodes] = verts[uniq]
    coords[n_vert_nodes:] = mesh.edge_midpoints

    from .mesh import TAG_DIRICHLET
    boundary_mask = np.zeros(n_nodes, dtype=bool)
    dir_edges = np.where(mesh.edge_tags == TAG_DIRICHLET)[0]
    boundary_mask[edge_node[dir_edges]] = True
    boundary_mask[vertex_node[mesh.edge_vertices[dir_edges].ravel()]] = True

    return C0Space(mesh=mesh, n_nodes=n_nodes, cell_nodes=cell_nodes,
                   vertex_node=vertex_node, edge_node=edge_node,
                   node_coords=coords, boundary_mask=boundary_mask)


# midpoint quadrature (degree 2) is exact for the P1 x P1 gradient products
_STIFF_QUAD = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])


def assemble_poisson(mesh: TriMesh) -> tuple[C0Space, sp.csr_matrix]:
    """Global stiffness matrix K[a,b] = int grad(phi_a) . grad(phi_b).

    Symmetric positive semidefinite; for a fully periodic mesh the kernel
    is exactly the constants (row sums vanish).
    """
    key = "poisson_system"
    if key in mesh._cache:
        return mesh._cache[key]
    space = build_space(mesh)
    g = mesh.bary_grads                               # (nc, 3, 2)
    dN = _shape_bary_gradients(_STIFF_QUAD)           # (3q, 6, 3)
    # physical gradients per cell and quad point: (nc, 3q, 6, 2)
    G = np.einsum("qkl,nld->nqkd", dN, g, optimize=True)
    K_loc = (mesh.areas[:, None, None] / 3.0
             * np.einsum("nqkd,nqld->nkl", G, G, optimize=True))
    rows = np.repeat(space.cell_nodes, 6, axis=1).ravel()
    cols = np.tile(space.cell_nodes, (1, 6)).ravel()
    K = sp.coo_matrix((K_loc.ravel(), (rows, cols)),
                      shape=(space.n_nodes, space.n_nodes)).tocsr()
    mesh._cache[key] = (space, K)
    return space, K


def load_vector(space: C0Space, fld: DGField,
                rule=None) -> np.ndarray:
    """b[a] = int w phi_a with the DG field w, via a degree-4 volume rule."""
    if rule is None:
        rule = triangle_rule(4)
    lam = rule.points                                  # (nq, 3)
    B = poly2.basis_values(lam[:, 0], lam[:, 1])       # (nq, 6) DG basis
    N = _shape_values(lam)                             # (nq, 6) FE shapes
    w_vals = fld.coeffs @ B.T                          # (nc, nq)
    b_loc = space.mesh.areas[:, None] * np.einsum(
        "q,nq,qk->nk", rule.weights, w_vals, N, optimize=True)
    b = np.zeros(space.n_nodes)
    np.add.at(b, space.cell_nodes.ravel(), b_loc.ravel())
    return b


# ---------------------------------------------------------------------------
# conjugate gradients

def solve_cg(op, rhs: np.ndarray, tol: float = 1e-10, max_iter: int = 10000,
             project_constants: bool = True,
             x0: np.ndarray | None = None) -> np.ndarray:
    """Diagonally preconditioned CG; raises on non-convergence.

    With ``project_constants`` the iterates (and residuals) are projected
    onto mean-zero vectors every iteration, pinning the constant-nullspace
    gauge of the periodic operator.  ``rhs`` must then be orthogonal to
    constants (compatibility); it is mean-projected up front.
    """
    rhs = np.asarray(rhs, dtype=float)
    n = rhs.shape[0]
    diag = np.asarray(op.diagonal(), dtype=float)
    if np.any(diag <= 0):
        raise PoissonError("operator diagonal must be positive for the "
                           "Jacobi preconditioner")

    if project_constants:
        drift = abs(rhs.sum()) / (np.linalg.norm(rhs) + 1e-300)
        if drift > 1e-8:
            raise PoissonError(
                f"load not orthogonal to constants (relative drift {drift:.2e})")
        rhs = rhs - rhs.mean()

    rhs_norm = np.linalg.norm(rhs)
    if x0 is not None:
        x = np.array(x0, dtype=float)
        if project_constants:
            x -= x.mean()
    else:
        x = np.zeros(n)
    if rhs_norm == 0.0:
        return np.zeros(n)
    r = rhs - op @ x
    if project_constants:
        r -= r.mean()
    if np.linalg.norm(r) <= tol * rhs_norm:
        return x
    z = r / diag
    p = z.copy()
    rz = float(r @ z)
    for _ in range(max_iter):
        Ap = op @ p
        alpha = rz / float(p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        if project_constants:
            x -= x.mean()
            r -= r.mean()
        res = np.linalg.norm(r)
        if res <= tol * rhs_norm:
            return x
        z = r / diag
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise PoissonError(
        f"CG did not converge in {max_iter} iterations "
        f"(relative residual {np.linalg.norm(r) / rhs_norm:.3e})")


def solve_constrained(op: sp.csr_matrix, rhs: np.ndarray,
                      fixed: np.ndarray, fixed_values: np.ndarray,
                      tol: float = 1e-12,
                      max_iter: int = 10000) -> np.ndarray:
    """Solve with prescribed values on ``fixed`` nodes (Dirichlet variant)."""
    free = ~fixed
    x = np.zeros(op.shape[0])
    x[fixed] = fixed_values
    b = rhs - op @ x
    K_ff = op[free][:, free].tocsr()
    x[free] = solve_cg(K_ff, b[free], tol=tol, max_iter=max_iter,
                       project_constants=False)
    return x


# ---------------------------------------------------------------------------
# stream function and velocity

@dataclass
class StreamFunction:
    space: C0Space
    coeffs: np.ndarray     # (n_nodes,)

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def values_on_cells(self, lam: np.ndarray) -> np.ndarray:
        """Values at shared barycentric points lam (nq, 3) -> (nc, nq)."""
        N = _shape_values(np.asarray(lam, float))
        return self.coeffs[self.space.cell_nodes] @ N.T

    def gradients_on_cells(self, lam: np.ndarray,
                           cells: np.ndarray | None = None) -> np.ndarray:
        """Physical gradients at barycentric points.

        ``lam`` is (nq, 3) shared across cells, or (n, nq, 3) per cell when
        ``cells`` selects a subset; returns (n, nq, 2).
        """
        mesh = self.space.mesh
        if cells is None:
            cells = np.arange(mesh.n_cells)
        c = self.coeffs[self.space.cell_nodes[cells]]     # (n, 6)
        lam = np.asarray(lam, float)
        dN = _shape_bary_gradients(lam)                   # (.., 6, 3)
        g = mesh.bary_grads[cells]                        # (n, 3, 2)
        if lam.ndim == 2:
            return np.einsum("nk,qkl,nld->nqd", c, dN, g, optimize=True)
        return np.einsum("nk,nqkl,nld->nqd", c, dN, g, optimize=True)


def stream_function(mesh: TriMesh, vorticity: DGField, tol: float = 1e-10,
                    max_iter: int = 20000,
                    initial_guess: np.ndarray | None = None) -> StreamFunction:
    """Solve Delta(phi) = w for the mean-zero stream function."""
    space, K = assemble_poisson(mesh)
    b = load_vector(space, vorticity)
    b -= b.mean()
    coeffs = solve_cg(K, -b, tol=tol, max_iter=max_iter, x0=initial_guess)
    return StreamFunction(space, coeffs)


class Velocity:
    """Per-cell evaluator for (u, v) = (-phi_y, phi_x).

    The vector field is evaluated from one specific cell at each point (the
    tangential component is two-valued on edges; the normal component —
    the only part the upwind convection flux uses — is single-valued).
    ``__call__`` recognizes the assembly module's cached quadrature-point
    arrays by identity; other point sets go through point location.
    """

    def __init__(self, phi: StreamFunction):
        self.phi = phi
        self._registry: list[tuple[np.ndarray, np.ndarray]] = []

    @staticmethod
    def _rotate(grad: np.ndarray) -> np.ndarray:
        return np.stack([-grad[..., 1], grad[..., 0]], axis=-1)

    def on_cells(self, lam: np.ndarray,
                 cells: np.ndarray | None = None) -> np.ndarray:
        return self._rotate(self.phi.gradients_on_cells(lam, cells))

    def register(self, pts: np.ndarray, values: np.ndarray) -> None:
        self._registry.append((pts, values))

    def bind_assembly(self, cfg) -> None:
        """Precompute values at the spatial-residual quadrature layouts."""
        from . import assembly
        mesh = self.phi.space.mesh
        vol = assembly._volume_geometry(mesh, cfg.volume_rule)
        self.register(vol["phys"], self.on_cells(cfg.volume_rule.points))

        geo = assembly._edge_geometry(mesh, cfg.edge_rule)
        pts = geo["pts"]                                  # (ne, nq, 2)
        lam = _bary_of(mesh, geo["left"], pts)
        v_edge = self.on_cells(lam, geo["left"])
        self.register(pts, v_edge)
        # the periodic right-copy points are the same physical locations;
        # the flux only consumes the (continuous) normal component
        self.register(geo["pts_r"], v_edge)

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        for arr, vals in self._registry:
            if pts is arr:
                return vals
        return self._locate_eval(np.asarray(pts, float))

    def _locate_eval(self, pts: np.ndarray) -> np.ndarray:
        mesh = self.phi.space.mesh
        flat = pts.reshape(-1, 2)
        cells = _locate_cells(mesh, flat)
        lam = _bary_of(mesh, cells, flat[:, None, :])[:, 0, :]
        out = self.on_cells(lam[:, None, :], cells)[:, 0, :]
        return out.reshape(pts.shape)


def _bary_of(mesh: TriMesh, cells: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Barycentric coordinates of pts (n, nq, 2) w.r.t. cells (n,)."""
    g = mesh.bary_grads[cells]                            # (n, 3, 2)
    rel = pts - mesh.vertices[mesh.cells[cells, 2]][:, None, :]
    xi = np.einsum("nqd,nd->nq", rel, g[:, 0], optimize=True)
    eta = np.einsum("nqd,nd->nq", rel, g[:, 1], optimize=True)
    return np.stack([xi, eta, 1.0 - xi - eta], axis=-1)


def _locate_cells(mesh: TriMesh, pts: np.ndarray) -> np.ndarray:
    """Containing cell of each point (periodic wrap applied first)."""
    from scipy.spatial import cKDTree
    pts = np.array(pts, float)
    if mesh.periods is not None:
        origin = mesh.vertices.min(axis=0)
        for d, L in enumerate(mesh.periods):
            if L:
                pts[:, d] = origin[d] + (pts[:, d] - origin[d]) % L
    key = "centroid_tree"
    tree = mesh._cache.get(key)
    if tree is None:
        tree = cKDTree(mesh.centroids)
        mesh._cache[key] = tree
    k = min(12, mesh.n_cells)
    _, cand = tree.query(pts, k=k)
    cand = np.atleast_2d(cand)
    out = np.full(len(pts), -1, dtype=np.int64)
    for j in range(cand.shape[1]):
        undone = out < 0
        if not undone.any():
            break
        cells = cand[undone, j]
        lam = _bary_of(mesh, cells, pts[undone][:, None, :])[:, 0, :]
        ok = (lam >= -1e-10).all(axis=1)
        idx = np.where(undone)[0][ok]
        out[idx] = cells[ok]
    if (out < 0).any():
        raise PoissonError("point location failed: point outside the mesh")
    return out


def velocity_field(phi: StreamFunction) -> Velocity:
    """Evaluator for the divergence-free velocity induced by ``phi``."""
    return Velocity(phi)
