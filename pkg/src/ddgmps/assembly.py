"""Semi-discrete spatial operator: coefficient rates for every cell.

The weak form assembled per cell K and test function v is

    |K| M dc/dt = int_K F(u).grad v  -  int_K A(u) grad u . grad v
                  - oint (LF flux) v + oint (diffusion flux) v
                  - oint (1/2) (A(u|_K) grad v).n [u] ds

with M the average-normalized local mass matrix.  All edge quantities are
computed in vectorized form over the whole edge set; the flux at a shared
edge is single-valued by construction (averaged gamma, shared scale), so the
two cell contributions are exactly antisymmetric and the scheme conserves
the total average.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import poly2
from .flux import (EDGE_LENGTH, EDGE_NORMAL_SCALE, GAUSS_POINT_SCALE,
                   FluxParams)
from .mesh import TAG_DIRICHLET, TriMesh, edge_scales_along
from .poly2 import DGField
from .problems import ProblemSpec
from .quadrature import EdgeRule, QuadRule, gauss_3, triangle_rule

_GAMMA_TINY = 1e-13


class AssemblyError(RuntimeError):
    pass


@dataclass
class SchemeConfig:
    flux_params: FluxParams = field(default_factory=FluxParams)
    interface_correction: bool = True
    edge_rule: EdgeRule = field(default_factory=gauss_3)
    volume_rule: QuadRule = field(default_factory=lambda: triangle_rule(4))
    convection_alpha_policy: str = "per_edge"

    def __post_init__(self):
        if self.edge_rule.degree < 3:
            raise ValueError("edge rule must be exact to degree >= 3")
        if self.convection_alpha_policy not in ("per_edge", "global"):
            raise ValueError("alpha policy must be per_edge or global")


def default_config(problem: ProblemSpec, **overrides) -> SchemeConfig:
    """Scheme configuration with the length-scale mode matched to the problem."""
    h_mode = (EDGE_NORMAL_SCALE if problem.diffusion_mode == "linear"
              else GAUSS_POINT_SCALE)
    params = overrides.pop("flux_params", FluxParams(h_mode=h_mode))
    return SchemeConfig(flux_params=params, **overrides)


@dataclass
class Residual:
    rates: np.ndarray  # (nc, 6) d(coeffs)/dt


# ---------------------------------------------------------------------------
# cached geometry

def _edge_geometry(mesh: TriMesh, rule: EdgeRule):
    """Per-edge trace data at the rule's quadrature points (cached).

    Returns a dict with: pts (ne,nq,2) left-copy coordinates, Bl/Br basis
    values (ne,nq,6), dBl/dBr physical basis gradients (ne,nq,6,2), Hl/Hr
    basis Hessians (ne,6,2,2), has_right mask, midpoint scale h_ab (ne,).
    """
    key = ("edge_geom", tuple(np.round(rule.nodes01, 15)))
    if key in mesh._cache:
        return mesh._cache[key]
    t = rule.nodes01
    a = mesh.vertices[mesh.edge_vertices[:, 0]]
    b = mesh.vertices[mesh.edge_vertices[:, 1]]
    pts = a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]
    hess = poly2.cell_basis_hessians(mesh)

    def side(cells, points):
        verts2 = mesh.vertices[mesh.cells[cells, 2]]
        g = mesh.bary_grads[cells]                      # (ne,3,2)
        rel = points - verts2[:, None, :]
        xi = np.einsum("nqd,nd->nq", rel, g[:, 0], optimize=True)
        eta = np.einsum("nqd,nd->nq", rel, g[:, 1], optimize=True)
        B = poly2.basis_values(xi, eta)                 # (ne,nq,6)
        db = poly2.basis_bary_gradients(xi, eta)        # (ne,nq,6,2)
        dB = (db[..., 0:1] * g[:, None, None, 0, :]
              + db[..., 1:2] * g[:, None, None, 1, :])  # (ne,nq,6,2)
        return B, dB, hess[cells]

    left = mesh.edge_left.astype(int)
    right = mesh.edge_right.astype(int)
    has_right = right >= 0
    Bl, dBl, Hl = side(left, pts)
    pts_r = pts + mesh.edge_shifts[:, None, :]
    r_safe = np.where(has_right, right, 0)
    Br, dBr, Hr = side(r_safe, pts_r)
    zero = ~has_right
    Br[zero] = 0.0
    dBr[zero] = 0.0
    Hr[zero] = 0.0
    mids = mesh.edge_midpoints[:, None, :]
    h_ab = edge_scales_along(mesh, mids, mesh.edge_normals[:, None, :])[:, 0]
    out = dict(pts=pts, pts_r=pts_r, Bl=Bl, dBl=dBl, Hl=Hl, Br=Br, dBr=dBr,
               Hr=Hr, has_right=has_right, h_ab=h_ab, left=left,
               right=r_safe)
    mesh._cache[key] = out
    return out


def _volume_geometry(mesh: TriMesh, rule: QuadRule):
    key = ("vol_geom", tuple(np.round(rule.weights, 15)))
    if key in mesh._cache:
        return mesh._cache[key]
    pts_b = rule.points
    B = poly2.basis_values(pts_b[:, 0], pts_b[:, 1])        # (nq,6)
    db = poly2.basis_bary_gradients(pts_b[:, 0], pts_b[:, 1])  # (nq,6,2)
    g = mesh.bary_grads                                      # (nc,3,2)
    dB = (db[None, :, :, 0:1] * g[:, None, None, 0, :]
          + db[None, :, :, 1:2] * g[:, None, None, 1, :])    # (nc,nq,6,2)
    phys = np.einsum("qk,nkd->nqd", pts_b, mesh.vertices[mesh.cells], optimize=True)
    out = dict(B=B, dB=dB, phys=phys)
    mesh._cache[key] = out
    return out


# ---------------------------------------------------------------------------
# residual

def spatial_residual(mesh: TriMesh, fld: DGField, problem: ProblemSpec,
                     cfg: SchemeConfig) -> Residual:
    R = np.zeros((mesh.n_cells, 6))
    _volume_terms(mesh, fld, problem, cfg, R)
    contrib = _edge_terms(mesh, fld, problem, cfg)
    # gather: cell c, local edge j -> contrib[edge, side]
    R += contrib[mesh.cell_edges, mesh.cell_sides].sum(axis=1)
    rates = (R @ poly2.MASS_INV.T) / mesh.areas[:, None]
    if not np.all(np.isfinite(rates)):
        bad = int(np.where(~np.isfinite(rates).all(axis=1))[0][0])
        raise AssemblyError(f"non-finite residual in cell {bad} "
                            f"at t={fld.time_stamp}")
    return Residual(rates)


def average_rate(mesh: TriMesh, fld: DGField, problem: ProblemSpec,
                 cfg: SchemeConfig, cell: int | None = None):
    """Time derivative of the cell average(s): the v = 1 test row."""
    rates = spatial_residual(mesh, fld, problem, cfg).rates
    avg = rates @ poly2.AVG_WEIGHTS
    return float(avg[cell]) if cell is not None else avg


def _volume_terms(mesh, fld, problem, cfg, R):
    geo = _volume_geometry(mesh, cfg.volume_rule)
    w = cfg.volume_rule.weights
    c = fld.coeffs
    if problem.diffusion is not None:
        u = np.einsum("qk,nk->nq", geo["B"], c, optimize=True)
        grad = np.einsum("nqkd,nk->nqd", geo["dB"], c, optimize=True)
        A = problem.diffusion(u)                        # (nc,nq,2,2)
        flow = np.einsum("nqde,nqe->nqd", A, grad, optimize=True)
        R -= mesh.areas[:, None] * np.einsum("q,nqd,nqkd->nk", w, flow, geo["dB"], optimize=True)
    if problem.convection is not None:
        u = np.einsum("qk,nk->nq", geo["B"], c, optimize=True)
        F = problem.convection.flux(u, geo["phys"])     # (nc,nq,2)
        R += mesh.areas[:, None] * np.einsum("q,nqd,nqkd->nk", w, F, geo["dB"], optimize=True)


def _edge_terms(mesh, fld, problem, cfg):
    """Per-edge contributions, shape (ne, 2, 6): side 0 = left, 1 = right."""
    geo = _edge_geometry(mesh, cfg.edge_rule)
    rule = cfg.edge_rule
    wq = rule.weights
    ne, nq = geo["Bl"].shape[:2]
    c = fld.coeffs
    n = mesh.edge_normals
    lens = mesh.edge_lengths
    has_right = geo["has_right"]
    dirichlet = mesh.edge_tags == TAG_DIRICHLET
    left, right = geo["left"], geo["right"]

    u_in = np.einsum("nqk,nk->nq", geo["Bl"], c[left], optimize=True)
    grad_in = np.einsum("nqkd,nk->nqd", geo["dBl"], c[left], optimize=True)
    u_out = np.einsum("nqk,nk->nq", geo["Br"], c[right], optimize=True)
    grad_out = np.einsum("nqkd,nk->nqd", geo["dBr"], c[right], optimize=True)
    u_out = np.where(has_right[:, None], u_out, 0.0)
    grad_out = np.where(has_right[:, None, None], grad_out, 0.0)

    contrib = np.zeros((ne, 2, 6))

    if problem.diffusion is not None:
        H_in = np.einsum("nkde,nk->nde", geo["Hl"], c[left], optimize=True)
        H_out = np.einsum("nkde,nk->nde", geo["Hr"], c[right], optimize=True)
        H_out = np.where(has_right[:, None, None], H_out, 0.0)

        u_edge = 0.5 * (u_in + u_out)
        A_edge = problem.diffusion(u_edge)              # (ne,nq,2,2)
        gamma = np.einsum("nqij,ni->nqj", A_edge, n, optimize=True)
        gnorm = np.linalg.norm(gamma, axis=-1)
        # degenerate diffusion: keep the jump penalty, measured along n
        gdir = np.where(gnorm[..., None] > _GAMMA_TINY, gamma,
                        n[:, None, :])
        # the length scale is a chord length and must be measured with the
        # direction oriented from the left cell into the right one
        gsign = np.sign(np.einsum("nqd,nd->nq", gdir, n, optimize=True))
        gdir = gdir * np.where(gsign == 0.0, 1.0, gsign)[..., None]

        params = cfg.flux_params
        if params.h_mode == EDGE_NORMAL_SCALE:
            scale = np.broadcast_to(geo["h_ab"][:, None], (ne, nq))
        elif params.h_mode == EDGE_LENGTH:
            scale = np.broadcast_to(lens[:, None], (ne, nq))
        else:
            scale = edge_scales_along(mesh, geo["pts"], gdir)
        good = (scale > 0) & np.isfinite(scale)
        if not np.all(good):
            bad = int(np.where(~good.all(axis=1))[0][0])
            raise AssemblyError(f"bad length scale on edge {bad}")

        ug_in = np.einsum("nqd,nqd->nq", grad_in, gamma, optimize=True)
        ug_out = np.einsum("nqd,nqd->nq", grad_out, gamma, optimize=True)
        ugg_in = np.einsum("nqd,nde,nqe->nq", gamma, H_in, gamma, optimize=True)
        ugg_out = np.einsum("nqd,nde,nqe->nq", gamma, H_out, gamma, optimize=True)
        s = (params.beta0 * (u_out - u_in) / scale
             + 0.5 * (ug_in + ug_out)
             + params.beta1 * scale * (ugg_out - ugg_in))
        base = lens[:, None] * wq[None, :]
        contrib[:, 0, :] += np.einsum("nq,nqk->nk", base * s, geo["Bl"], optimize=True)
        contrib[:, 1, :] -= np.einsum("nq,nqk->nk", base * s, geo["Br"], optimize=True)

        if cfg.interface_correction:
            A_in = problem.diffusion(u_in)
            A_out = problem.diffusion(u_out)
            jump = u_out - u_in
            corr_l = np.einsum("nq,nqkd,nqde,ne->nk", base * jump,
                               geo["dBl"], A_in, n, optimize=True)
            corr_r = np.einsum("nq,nqkd,nqde,ne->nk", base * (-jump),
                               geo["dBr"], A_out, -n, optimize=True)
            contrib[:, 0, :] -= 0.5 * corr_l
            contrib[:, 1, :] -= 0.5 * corr_r

    if problem.convection is not None:
        F_in = problem.convection.flux(u_in, geo["pts"])
        F_out = problem.convection.flux(u_out, geo["pts_r"])
        Fn_in = np.einsum("nqd,nd->nq", F_in, n, optimize=True)
        Fn_out = np.einsum("nqd,nd->nq", F_out, n, optimize=True)
        alpha = _alpha(mesh, problem, cfg, u_in, u_out, geo,
                       fld.time_stamp)
        fhat = 0.5 * (Fn_in + Fn_out - alpha * (u_out - u_in))
        base = lens[:, None] * wq[None, :]
        contrib[:, 0, :] -= np.einsum("nq,nqk->nk", base * fhat, geo["Bl"], optimize=True)
        contrib[:, 1, :] += np.einsum("nq,nqk->nk", base * fhat, geo["Br"], optimize=True)

    return contrib


def _alpha(mesh, problem, cfg, u_in, u_out, geo, t):
    """Lax-Friedrichs dissipation speed, (ne, 1) or scalar."""
    n = mesh.edge_normals
    m = problem.bounds.lower(t)
    M = problem.bounds.upper(t)
    cand = [u_in, u_out, np.full_like(u_in, m), np.full_like(u_in, M)]
    best = np.zeros(u_in.shape[0])
    for u in cand:
        dF = problem.convection.dflux(u, geo["pts"])
        speed = np.abs(np.einsum("nqd,nd->nq", dF, n, optimize=True)).max(axis=1)
        best = np.maximum(best, speed)
    if cfg.convection_alpha_policy == "global":
        return float(best.max())
    return best[:, None]
