import math

import numpy as np
import pytest

from ddgmps.flux import FluxParams
from ddgmps.mesh import build_mesh
from ddgmps.poly2 import DGField
from ddgmps.timestep import (CflParams, cfl_A_linear, cfl_A_nonlinear,
                             compute_dt, forward_euler_step, ssp_rk3_step)


def test_cfl_linear_reference_value():
    # (5, 1/8, pi/3, pi/3): the 1/(6(8b1-1)) branch is +inf, the remaining
    # min is w1/36 with w1 = 2/81, times tan(pi/3)
    got = cfl_A_linear(5.0, 0.125, math.pi / 3, math.pi / 3)
    expected = math.sqrt(3.0) * (2.0 / 81.0) / 36.0
    assert got == pytest.approx(expected, rel=1e-13)
    assert got == pytest.approx(1.188e-3, rel=1e-3)


def test_cfl_linear_degenerate_branch():
    # beta1 = 1/4 kills the first branch denominator 72(1-4*beta1) -> +inf;
    # the result comes from the second group with 1/(6(8/4-1)) = 1/6
    w1 = 2.0 / 81.0
    got = cfl_A_linear(5.0, 0.25, math.pi / 3, math.pi / 3)
    expected = math.sqrt(3.0) * min(1.0 / 6.0, w1 / (8 * (5 - 9 / 4 + 1.5)),
                                    w1 / 20.0)
    assert got == pytest.approx(expected, rel=1e-13)
    assert math.isfinite(got) and got > 0


def test_cfl_linear_monotone_in_beta0():
    vals = [cfl_A_linear(b0, 0.125, math.pi / 3, math.pi / 3)
            for b0 in np.linspace(1.5, 20.0, 30)]
    assert all(a >= b - 1e-15 for a, b in zip(vals, vals[1:]))


def test_cfl_nonlinear_reference_value():
    w0 = 0.01
    got = cfl_A_nonlinear(5.0, 0.125, math.pi / 3, w0)
    expected = math.sin(math.pi / 3) * ((3 - math.sqrt(3)) / 3) * w0 / 14.0
    assert got == pytest.approx(expected, rel=1e-13)


def test_cfl_nonlinear_scales_with_w0():
    a = cfl_A_nonlinear(5.0, 0.125, math.pi / 3, 0.01)
    b = cfl_A_nonlinear(5.0, 0.125, math.pi / 3, 0.02)
    assert b == pytest.approx(2 * a, rel=1e-13)


def _single_cell_mesh():
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    return build_mesh(verts, np.array([[0, 1, 2]]))


def _scalar_field(value):
    coeffs = np.zeros((1, 6))
    coeffs[0, 0] = value
    return DGField(coeffs)


def test_forward_euler_linear_decay():
    fld = _scalar_field(1.0)
    dt = 0.05
    out = forward_euler_step(fld, dt, lambda f: -f.coeffs)
    assert out.coeffs[0, 0] == pytest.approx(1.0 - dt, abs=1e-15)


def test_rk3_matches_cubic_taylor():
    # u' = -u: one SSP-RK3 step equals the degree-3 Taylor polynomial of
    # exp(-dt) exactly (classic Shu-Osher convex combination)
    dt = 0.137
    fld = _scalar_field(1.0)
    out = ssp_rk3_step(fld, dt, lambda f: -f.coeffs)
    taylor = 1.0 - dt + dt**2 / 2 - dt**3 / 6
    assert out.coeffs[0, 0] == pytest.approx(taylor, abs=1e-15)


def test_rk3_third_order_on_nonlinear_ode():
    # u' = u^2, u(0)=0.5, exact u(t) = 1/(2 - t): error shrinks ~ dt^4
    def run(dt, steps):
        fld = _scalar_field(0.5)
        for _ in range(steps):
            fld = ssp_rk3_step(fld, dt, lambda f: f.coeffs**2)
        return fld.coeffs[0, 0]

    errs = [abs(run(dt, int(round(1.0 / dt))) - 1.0)
            for dt in (0.1, 0.05, 0.025)]
    rates = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert min(rates) > 2.7


def test_post_stage_hook_called_each_stage():
    calls = []

    def hook(fld):
        calls.append(fld.coeffs[0, 0])
        return fld

    fld = _scalar_field(1.0)
    ssp_rk3_step(fld, 0.1, lambda f: -f.coeffs, post_stage=hook)
    assert len(calls) == 3


def test_compute_dt_linear_theorem(perturbed_mesh):
    m = perturbed_mesh
    params = CflParams(safety=0.9, mode="linear_thm")
    dt = compute_dt(m, params, FluxParams(5.0, 0.125))
    areas = np.array([m.cell(c).area for c in range(m.n_cells)])
    bound = cfl_A_linear(5.0, 0.125, m.theta_min, m.theta_max) * areas.min()
    assert dt == pytest.approx(0.9 * bound, rel=1e-12)


def test_compute_dt_user_override(perturbed_mesh):
    params = CflParams(user_dt=1.25e-4)
    dt = compute_dt(perturbed_mesh, params, FluxParams())
    assert dt == 1.25e-4


def test_compute_dt_nonlinear_needs_w0(perturbed_mesh):
    from ddgmps.quadrature import min_selected_weight
    w0 = min_selected_weight(perturbed_mesh)
    params = CflParams(safety=1.0, mode="nonlinear_thm")
    dt = compute_dt(perturbed_mesh, params, FluxParams(5.0, 0.125), w0=w0)
    assert dt > 0
