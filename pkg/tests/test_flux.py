import numpy as np
import pytest

from ddgmps.flux import (EdgeTracePair, FluxParams, Trace, ddg_flux,
                         gamma_vector, interface_correction, lax_friedrichs,
                         validate_params)


def _pair(inner, outer, scale=0.1, gamma=(1.0, 0.0)):
    return EdgeTracePair(Trace(*inner), Trace(*outer), scale,
                         np.asarray(gamma, dtype=float))


def test_consistency_continuous_trace():
    # identical traces on both sides: jumps vanish, flux = shared derivative
    params = FluxParams(beta0=5.0, beta1=0.125)
    tr = _pair((0.7, 1.3, -2.0), (0.7, 1.3, -2.0))
    assert ddg_flux(params, tr) == pytest.approx(1.3, abs=1e-14)


def test_flux_component_values():
    beta0, beta1, h = 5.0, 0.125, 0.2
    params = FluxParams(beta0=beta0, beta1=beta1)
    u_in, u_out = 0.3, 0.9
    g_in, g_out = 1.0, 2.0
    gg_in, gg_out = -1.0, 3.0
    tr = _pair((u_in, g_in, gg_in), (u_out, g_out, gg_out), scale=h)
    expected = (beta0 * (u_out - u_in) / h + 0.5 * (g_in + g_out)
                + beta1 * h * (gg_out - gg_in))
    assert ddg_flux(params, tr) == pytest.approx(expected, abs=1e-13)


def test_flux_linear_in_traces(rng):
    params = FluxParams()
    a, b = rng.standard_normal(3), rng.standard_normal(3)
    c, d = rng.standard_normal(3), rng.standard_normal(3)
    s, t = 0.4, -1.1
    mixed = _pair(tuple(s * a + t * c), tuple(s * b + t * d))
    parts = (s * ddg_flux(params, _pair(tuple(a), tuple(b)))
             + t * ddg_flux(params, _pair(tuple(c), tuple(d))))
    assert ddg_flux(params, mixed) == pytest.approx(parts, abs=1e-12)


def test_gamma_vector_identity_diffusion():
    n = np.array([0.6, 0.8])
    g = gamma_vector(lambda u: np.eye(2), 0.5, n)
    assert np.allclose(g, n, atol=1e-14)


def test_gamma_vector_anisotropic():
    A = np.array([[2.0, 1.0], [0.0, 3.0]])
    n = np.array([1.0, 0.0])
    g = gamma_vector(lambda u: A, 0.0, n)
    assert np.allclose(g, A.T @ n, atol=1e-14)


def test_interface_correction_value():
    n = np.array([0.0, 1.0])
    grad_v = np.array([2.0, -1.0])
    A = 3.0 * np.eye(2)
    jump = 0.4
    got = interface_correction(jump, grad_v, A, n)
    assert got == pytest.approx(0.5 * (A @ grad_v) @ n * jump, abs=1e-14)


def test_lax_friedrichs_upwind_limit():
    # linear flux F(u) = c*u with alpha = |c.n| reduces to pure upwinding
    c = np.array([1.0, 0.0])
    n = np.array([1.0, 0.0])
    F = lambda u: c * u
    got = lax_friedrichs(F, 0.3, 0.9, n, alpha=1.0)
    assert got == pytest.approx(0.3, abs=1e-14)  # wind blows from inner side
    got = lax_friedrichs(F, 0.3, 0.9, -n, alpha=1.0)
    assert got == pytest.approx(-0.9, abs=1e-14)


def test_lax_friedrichs_consistency():
    F = lambda u: np.array([u**2 / 2, u])
    n = np.array([0.8, 0.6])
    u = 0.7
    got = lax_friedrichs(F, u, u, n, alpha=2.0)
    assert got == pytest.approx(F(u) @ n, abs=1e-14)


def test_validate_params_reference_pair():
    ok_lin, _ = validate_params(FluxParams(5.0, 0.125), "linear")
    ok_non, _ = validate_params(FluxParams(5.0, 0.125), "nonlinear")
    assert ok_lin and ok_non


def test_validate_params_boundary_case():
    # beta0 = 1 fails the linear bound 9/4 - 6/8 = 3/2 but sits exactly on
    # the nonlinear bound 3/2 - 4/8 = 1
    ok_lin, msg = validate_params(FluxParams(1.0, 0.125), "linear")
    ok_non, _ = validate_params(FluxParams(1.0, 0.125), "nonlinear")
    assert not ok_lin and msg
    assert ok_non


def test_validate_params_beta1_range():
    for mode in ("linear", "nonlinear"):
        ok, _ = validate_params(FluxParams(5.0, 0.3), mode)
        assert not ok


def test_bad_h_mode_rejected():
    with pytest.raises(ValueError):
        FluxParams(h_mode="bogus")
