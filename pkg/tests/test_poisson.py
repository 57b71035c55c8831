import math

import numpy as np
import pytest
import scipy.sparse as sp

from ddgmps import mesh as meshmod
from ddgmps.poisson import (PoissonError, assemble_poisson, build_space,
                            load_vector, solve_cg, solve_constrained,
                            stream_function, velocity_field)
from ddgmps.poly2 import DGField, project_field
from ddgmps.quadrature import gauss_3, triangle_rule


def _two_pi_mesh(n):
    return meshmod.generate_structured(n, n, domain=(0, 2 * math.pi,
                                                     0, 2 * math.pi),
                                       periodic=True)


def test_space_counts_periodic(uniform_mesh):
    space = build_space(uniform_mesh)
    # 8x8 periodic grid: 64 distinct vertices after identification,
    # one midpoint per merged edge
    assert space.n_nodes == 64 + uniform_mesh.n_edges
    assert space.cell_nodes.shape == (uniform_mesh.n_cells, 6)
    assert not space.boundary_mask.any()


def test_stiffness_symmetric_and_singular(uniform_mesh):
    space, K = assemble_poisson(uniform_mesh)
    assert abs(K - K.T).max() == 0.0
    row_sums = np.asarray(K.sum(axis=1)).ravel()
    assert np.abs(row_sums).max() < 1e-12
    # energy nonnegative
    rng = np.random.default_rng(3)
    for _ in range(5):
        x = rng.standard_normal(space.n_nodes)
        assert float(x @ (K @ x)) >= -1e-12


def test_dirichlet_quadratic_patch(dirichlet_mesh):
    # phi = x(1-x) solves -Delta(phi) = 2; P2 elements reproduce it exactly
    m = dirichlet_mesh
    space, K = assemble_poisson(m)
    rhs_field = DGField(np.zeros((m.n_cells, 6)))
    rhs_field.coeffs[:, 0] = 2.0
    b = load_vector(space, rhs_field)
    exact = space.node_coords[:, 0] * (1 - space.node_coords[:, 0])
    x = solve_constrained(K, b, space.boundary_mask,
                          exact[space.boundary_mask])
    assert np.abs(x - exact).max() < 1e-10


def test_cg_three_by_three():
    A = sp.csr_matrix(np.array([[4.0, 1.0, 0.0],
                                [1.0, 3.0, 1.0],
                                [0.0, 1.0, 5.0]]))
    b = np.array([1.0, -2.0, 3.0])
    x = solve_cg(A, b, tol=1e-14, max_iter=3, project_constants=False)
    assert np.allclose(A @ x, b, atol=1e-12)


def test_cg_zero_rhs(uniform_mesh):
    _, K = assemble_poisson(uniform_mesh)
    x = solve_cg(K, np.zeros(K.shape[0]))
    assert np.all(x == 0.0)


def test_cg_incompatible_rhs_raises(uniform_mesh):
    _, K = assemble_poisson(uniform_mesh)
    with pytest.raises(PoissonError):
        solve_cg(K, np.ones(K.shape[0]))


def test_cg_nonconvergence_raises(uniform_mesh):
    space, K = assemble_poisson(uniform_mesh)
    rng = np.random.default_rng(5)
    b = rng.standard_normal(space.n_nodes)
    b -= b.mean()
    with pytest.raises(PoissonError):
        solve_cg(K, b, tol=1e-14, max_iter=2)


def test_manufactured_solution_third_order():
    # Delta(phi) = -2 sin x sin y  =>  phi = sin x sin y (mean zero)
    errs, hs = [], []
    for n in (8, 16, 32):
        m = _two_pi_mesh(n)
        w = project_field(lambda x, y: -2 * np.sin(x) * np.sin(y), m,
                          triangle_rule(4))
        phi = stream_function(m, w, tol=1e-12)
        lam = triangle_rule(5).points
        wts = triangle_rule(5).weights
        vals = phi.values_on_cells(lam)
        cells = m.cells
        verts = m.vertices[cells]          # (nc, 3, 2)
        phys = np.einsum("qj,njd->nqd", lam, verts)
        exact = np.sin(phys[..., 0]) * np.sin(phys[..., 1])
        err2 = float(np.einsum("n,q,nq->", m.areas, wts,
                               (vals - exact) ** 2))
        errs.append(math.sqrt(err2))
        hs.append(1.0 / n)
    orders = [math.log(errs[i] / errs[i + 1]) / math.log(hs[i] / hs[i + 1])
              for i in range(2)]
    assert min(orders) > 2.8


def test_velocity_trivial_cases(dirichlet_mesh):
    m = dirichlet_mesh
    space, _ = assemble_poisson(m)
    from ddgmps.poisson import StreamFunction

    # constant phi -> zero velocity
    phi_c = StreamFunction(space, np.ones(space.n_nodes))
    v = velocity_field(phi_c)
    lam = triangle_rule(2).points
    assert np.abs(v.on_cells(lam)).max() < 1e-12

    # phi = x -> velocity (0, 1)
    phi_x = StreamFunction(space, space.node_coords[:, 0].copy())
    v = velocity_field(phi_x)
    vals = v.on_cells(lam)
    assert np.allclose(vals[..., 0], 0.0, atol=1e-12)
    assert np.allclose(vals[..., 1], 1.0, atol=1e-12)


def test_normal_velocity_continuity():
    m = _two_pi_mesh(8)
    w = project_field(lambda x, y: -2 * np.sin(x) * np.sin(y), m,
                      triangle_rule(4))
    phi = stream_function(m, w, tol=1e-12)
    vel = velocity_field(phi)
    rule = gauss_3()
    worst = 0.0
    s = rule.nodes01
    for e in range(m.n_edges):
        if int(m.edge_right[e]) < 0:
            continue
        left, right = int(m.edge_left[e]), int(m.edge_right[e])
        a, b = m.vertices[m.edge_vertices[e]]
        pts_l = a[None, :] + s[:, None] * (b - a)[None, :]
        pts_r = pts_l + m.edge_shifts[e]
        from ddgmps.poly2 import barycentric
        lam_l = np.zeros((len(s), 3))
        xi = barycentric(m, left, pts_l)
        lam_l[:, 0], lam_l[:, 1] = xi[:, 0], xi[:, 1]
        lam_l[:, 2] = 1 - xi.sum(axis=1)
        lam_r = np.zeros((len(s), 3))
        xr = barycentric(m, right, pts_r)
        lam_r[:, 0], lam_r[:, 1] = xr[:, 0], xr[:, 1]
        lam_r[:, 2] = 1 - xr.sum(axis=1)
        v_l = vel.on_cells(lam_l[None], np.array([left]))[0]
        v_r = vel.on_cells(lam_r[None], np.array([right]))[0]
        jump = np.abs((v_l - v_r) @ m.edge_normals[e]).max()
        worst = max(worst, jump)
    assert worst <= 1e-11 * phi.norm()
