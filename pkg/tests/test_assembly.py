import numpy as np
import pytest

from ddgmps import assembly, problems
from ddgmps.assembly import average_rate, default_config, spatial_residual
from ddgmps.mesh import TAG_INTERIOR
from ddgmps.poly2 import AVG_WEIGHTS, DGField, project_field
from ddgmps.quadrature import triangle_rule


@pytest.fixture(scope="module")
def heat():
    return problems.linear_diffusion()


def _areas(mesh):
    return np.array([mesh.cell(c).area for c in range(mesh.n_cells)])


def test_constant_field_zero_residual(uniform_mesh, heat):
    cfg = default_config(heat)
    coeffs = np.zeros((uniform_mesh.n_cells, 6))
    coeffs[:, 0] = 0.7
    res = spatial_residual(uniform_mesh, DGField(coeffs), heat, cfg)
    assert np.abs(res.rates).max() < 1e-12


def test_conservation_periodic(uniform_mesh, heat):
    cfg = default_config(heat)
    fld = project_field(heat.initial, uniform_mesh, cfg.volume_rule)
    res = spatial_residual(uniform_mesh, fld, heat, cfg)
    rates = res.rates @ AVG_WEIGHTS
    total = float(_areas(uniform_mesh) @ rates)
    assert abs(total) < 1e-12


def test_interior_cell_exact_for_global_quadratic(dirichlet_mesh, heat):
    # a globally quadratic field is exactly representable; the DDG flux of
    # quadratics is exact, so the average rate of an interior cell equals
    # the exact Laplacian (here 4)
    m = dirichlet_mesh
    cfg = default_config(heat)
    fld = project_field(lambda x, y: x**2 + y**2, m, cfg.volume_rule)
    interior = [c for c in range(m.n_cells)
                if all(m.edge_tags[e] == TAG_INTERIOR for e in m.cell_edges[c])
                and all(m.edge_tags[e2] == TAG_INTERIOR
                        for e in m.cell_edges[c]
                        for nb in (int(m.edge_left[e]), int(m.edge_right[e]))
                        for e2 in m.cell_edges[nb])]
    assert interior
    for c in interior[:5]:
        assert average_rate(m, fld, heat, cfg, cell=c) == pytest.approx(
            4.0, abs=1e-9)


def test_hot_cell_cools(uniform_mesh, heat):
    cfg = default_config(heat)
    coeffs = np.zeros((uniform_mesh.n_cells, 6))
    coeffs[10, 0] = 1.0
    fld = DGField(coeffs)
    assert average_rate(uniform_mesh, fld, heat, cfg, cell=10) < 0


def test_average_rate_matches_residual_projection(uniform_mesh, heat, rng):
    cfg = default_config(heat)
    coeffs = 0.1 * rng.standard_normal((uniform_mesh.n_cells, 6))
    fld = DGField(coeffs)
    res = spatial_residual(uniform_mesh, fld, heat, cfg)
    rates = res.rates @ AVG_WEIGHTS
    for c in (0, 17, 63):
        assert average_rate(uniform_mesh, fld, heat, cfg, cell=c) == \
            pytest.approx(float(rates[c]), abs=1e-13)


def test_default_config_h_mode(heat):
    cfg_lin = default_config(heat)
    assert cfg_lin.flux_params.h_mode == assembly.EDGE_NORMAL_SCALE
    cfg_non = default_config(problems.porous_medium())
    assert cfg_non.flux_params.h_mode == assembly.GAUSS_POINT_SCALE


def test_residual_linear_in_field_for_heat(uniform_mesh, heat, rng):
    cfg = default_config(heat)
    a = DGField(rng.standard_normal((uniform_mesh.n_cells, 6)))
    b = DGField(rng.standard_normal((uniform_mesh.n_cells, 6)))
    s, t = 0.6, -1.3
    mixed = DGField(s * a.coeffs + t * b.coeffs)
    res_mixed = spatial_residual(uniform_mesh, mixed, heat, cfg).rates
    res_parts = (s * spatial_residual(uniform_mesh, a, heat, cfg).rates
                 + t * spatial_residual(uniform_mesh, b, heat, cfg).rates)
    scale = np.abs(res_parts).max()
    assert np.abs(res_mixed - res_parts).max() < 1e-11 * max(scale, 1.0)


def test_obtuse_mesh_conservation(obtuse_mesh, heat):
    cfg = default_config(heat)
    fld = project_field(heat.initial, obtuse_mesh, cfg.volume_rule)
    res = spatial_residual(obtuse_mesh, fld, heat, cfg)
    rates = res.rates @ AVG_WEIGHTS
    assert abs(float(_areas(obtuse_mesh) @ rates)) < 1e-12
