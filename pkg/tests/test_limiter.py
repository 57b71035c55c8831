import numpy as np
import pytest

from ddgmps.limiter import (BoundViolationError, Bounds, SlopeLimiterParams,
                            mps_limit, slope_limit)
from ddgmps.poly2 import (AVG_WEIGHTS, DGField, QuadraticPoly, basis_values,
                          cell_average, extrema_on_cell)

UNIT = Bounds(lambda t: 0.0, lambda t: 1.0)


def _field(mesh, rng, lo=0.0, hi=1.0):
    # random field whose cell averages sit at the midpoint of [lo, hi]
    coeffs = 0.25 * rng.standard_normal((mesh.n_cells, 6))
    coeffs[:, 0] += 0.5 * (lo + hi) - coeffs @ AVG_WEIGHTS
    return DGField(coeffs)


def test_worked_theta_example(uniform_mesh):
    # one cell with average 0.5, extrema (-0.1, 1.2); bounds [0, 1]
    # theta = min(1, 0.5/0.7, 0.5/0.6) = 5/7
    m = uniform_mesh
    coeffs = np.zeros((m.n_cells, 6))
    coeffs[:, 0] = 0.5
    cell = 4
    coeffs[cell] = [-0.1, 1.3, 0.5, 0, 0, 0]
    p = QuadraticPoly(coeffs[cell])
    assert cell_average(p) == pytest.approx(0.5, abs=1e-14)
    assert extrema_on_cell(p) == (pytest.approx(-0.1, abs=1e-14),
                                  pytest.approx(1.2, abs=1e-14))
    theta = 5.0 / 7.0
    expected = theta * (coeffs[cell] - [0.5, 0, 0, 0, 0, 0])
    expected[0] += 0.5
    out = mps_limit(DGField(coeffs), m, UNIT)
    assert np.allclose(out.coeffs[cell], expected, atol=1e-14)
    lo, hi = extrema_on_cell(QuadraticPoly(out.coeffs[cell]))
    assert hi == pytest.approx(1.0, abs=1e-13)  # the binding bound is attained
    assert lo >= -1e-13


def test_average_preservation(uniform_mesh, rng):
    fld = _field(uniform_mesh, rng)
    before = fld.coeffs @ AVG_WEIGHTS
    out = mps_limit(fld, uniform_mesh, UNIT)
    after = out.coeffs @ AVG_WEIGHTS
    assert np.abs(after - before).max() < 1e-14


def test_pointwise_bounds(uniform_mesh, rng):
    fld = _field(uniform_mesh, rng)
    out = mps_limit(fld, uniform_mesh, UNIT)
    n = 100  # 100x100 barycentric lattice ~ 1e4 samples per cell
    xi, eta = np.meshgrid(np.linspace(0, 1, n), np.linspace(0, 1, n))
    keep = xi + eta <= 1.0
    vals = basis_values(xi[keep], eta[keep]) @ out.coeffs.T
    assert vals.min() >= -1e-12
    assert vals.max() <= 1.0 + 1e-12


def test_idempotence(uniform_mesh, rng):
    fld = _field(uniform_mesh, rng)
    once = mps_limit(fld, uniform_mesh, UNIT)
    twice = mps_limit(once, uniform_mesh, UNIT)
    assert np.abs(twice.coeffs - once.coeffs).max() < 1e-14


def test_in_bounds_field_untouched(uniform_mesh):
    coeffs = np.full((uniform_mesh.n_cells, 6), 0.0)
    coeffs[:, 0] = 0.4
    coeffs[:, 1] = 0.1  # ranges within [0.4, 0.5]
    fld = DGField(coeffs.copy())
    out = mps_limit(fld, uniform_mesh, UNIT)
    assert np.array_equal(out.coeffs, coeffs)


def test_average_outside_bounds_raises(uniform_mesh):
    coeffs = np.zeros((uniform_mesh.n_cells, 6))
    coeffs[:, 0] = 0.5
    coeffs[3, 0] = 1.5  # average escapes by far more than the guard
    with pytest.raises(BoundViolationError):
        mps_limit(DGField(coeffs), uniform_mesh, UNIT)


def test_average_guard_clamps(uniform_mesh):
    coeffs = np.zeros((uniform_mesh.n_cells, 6))
    coeffs[:, 0] = 0.5
    coeffs[3, 0] = 1.0 + 5e-12  # inside the 1e-11 floating-point guard
    out = mps_limit(DGField(coeffs), uniform_mesh, UNIT)
    assert out.coeffs[3, 0] == pytest.approx(1.0, abs=1e-14)


def test_time_dependent_bounds(uniform_mesh):
    bounds = Bounds(lambda t: 0.0, lambda t: np.exp(-t))
    coeffs = np.zeros((uniform_mesh.n_cells, 6))
    coeffs[:, 0] = 0.2
    coeffs[:, 1] = 0.3  # averages 0.3 inside, max 0.5 > exp(-1) ~ 0.3679
    out = mps_limit(DGField(coeffs), uniform_mesh, bounds, t=1.0)
    lo, hi = extrema_on_cell(QuadraticPoly(out.coeffs[0]))
    assert hi <= np.exp(-1.0) + 1e-13


def test_slope_limit_preserves_average(uniform_mesh, rng):
    fld = DGField(2.0 * rng.standard_normal((uniform_mesh.n_cells, 6)))
    before = fld.coeffs @ AVG_WEIGHTS
    out = slope_limit(fld, uniform_mesh, SlopeLimiterParams(m_tvb=0.0))
    after = out.coeffs @ AVG_WEIGHTS
    assert np.abs(after - before).max() < 1e-13


def test_slope_limit_keeps_smooth_field(uniform_mesh):
    # a globally linear profile passes the TVB test untouched
    from ddgmps.poly2 import project_field
    from ddgmps.quadrature import triangle_rule
    fld = project_field(lambda x, y: 0.3 * x + 0.1 * y, uniform_mesh,
                        triangle_rule(4))
    out = slope_limit(fld, uniform_mesh, SlopeLimiterParams())
    assert np.abs(out.coeffs - fld.coeffs).max() < 1e-12
