"""Interface numerical fluxes for the DG scheme.

The diffusion flux combines a penalized jump, the average first directional
derivative, and a scaled jump of the second directional derivative; the
interface-correction term symmetrizes the scheme at cell boundaries; the
convection flux is global Lax-Friedrichs.  All functions are pure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EDGE_NORMAL_SCALE = "edge_normal_scale"
GAUSS_POINT_SCALE = "gauss_point_scale"
EDGE_LENGTH = "edge_length"
_H_MODES = (EDGE_NORMAL_SCALE, GAUSS_POINT_SCALE, EDGE_LENGTH)


@dataclass(frozen=True)
class FluxParams:
    """Diffusion flux coefficients and length-scale convention."""

    beta0: float = 5.0
    beta1: float = 0.125
    h_mode: str = GAUSS_POINT_SCALE

    def __post_init__(self):
        if self.h_mode not in _H_MODES:
            raise ValueError(f"unknown h_mode {self.h_mode!r}")


@dataclass(frozen=True)
class Trace:
    """One-sided trace data (value and directional derivatives along gamma)."""

    u: float
    u_g: float
    u_gg: float


@dataclass(frozen=True)
class EdgeTracePair:
    """Two-sided trace at one quadrature point of an edge."""

    inner: Trace
    outer: Trace
    scale: float
    gamma: np.ndarray

    def __post_init__(self):
        if not self.scale > 0.0:
            raise ValueError(f"nonpositive edge scale {self.scale}")


def ddg_flux(params: FluxParams, trace: EdgeTracePair) -> float:
    """Diffusion flux in the gamma direction at one quadrature point."""
    if not trace.scale > 0.0:
        raise ValueError("nonpositive edge scale")
    jump_u = trace.outer.u - trace.inner.u
    avg_g = 0.5 * (trace.inner.u_g + trace.outer.u_g)
    jump_gg = trace.outer.u_gg - trace.inner.u_gg
    return (params.beta0 * jump_u / trace.scale + avg_g
            + params.beta1 * trace.scale * jump_gg)


def ddg_flux_arrays(params: FluxParams, u_in, u_out, ug_in, ug_out,
                    ugg_in, ugg_out, scale) -> np.ndarray:
    """Vectorized ``ddg_flux`` over arrays of trace data."""
    return (params.beta0 * (u_out - u_in) / scale
            + 0.5 * (ug_in + ug_out)
            + params.beta1 * scale * (ugg_out - ugg_in))


def gamma_vector(A, u_edge: float, n: np.ndarray) -> np.ndarray:
    """Direction gamma = A(u)^T n of the diffusion flux; gamma . n > 0."""
    mat = np.asarray(A(u_edge), dtype=float)
    g = mat.T @ np.asarray(n, dtype=float)
    if not float(g @ n) > 0.0:
        raise ValueError(
            f"diffusion matrix not positive along the normal at u={u_edge}")
    return g


def interface_correction(u_jump: float, testgrad_inner: np.ndarray,
                         A_inner: np.ndarray, n: np.ndarray) -> float:
    """Correction term (1/2) (A_in grad v|_in) . n [u] for one test function."""
    flow = np.asarray(A_inner, float) @ np.asarray(testgrad_inner, float)
    return 0.5 * float(flow @ np.asarray(n, float)) * u_jump


def lax_friedrichs(F, u_inner: float, u_outer: float, n: np.ndarray,
                   alpha: float) -> float:
    """Lax-Friedrichs convection flux in direction n."""
    fi = np.asarray(F(u_inner), dtype=float)
    fo = np.asarray(F(u_outer), dtype=float)
    n = np.asarray(n, dtype=float)
    return 0.5 * (float(fi @ n) + float(fo @ n) - alpha * (u_outer - u_inner))


def lax_friedrichs_arrays(Fn_inner, Fn_outer, u_inner, u_outer,
                          alpha) -> np.ndarray:
    """Vectorized Lax-Friedrichs given precomputed normal flux values."""
    return 0.5 * (Fn_inner + Fn_outer - alpha * (u_outer - u_inner))


def validate_params(params: FluxParams, mode: str) -> tuple[bool, str]:
    """Check the maximum-principle coefficient conditions; never raises.

    ``linear``:    beta0 >= 9/4 - 6*beta1 and 1/8 <= beta1 <= 1/4.
    ``nonlinear``: beta0 >= 3/2 - 4*beta1 and 1/8 <= beta1 <= 1/4.
    """
    b0, b1 = params.beta0, params.beta1
    msgs = []
    if not (1 / 8 <= b1 <= 1 / 4):
        msgs.append(f"beta1={b1} outside [1/8, 1/4]")
    if mode == "linear":
        if not b0 >= 9 / 4 - 6 * b1:
            msgs.append(f"beta0={b0} < 9/4 - 6*beta1 = {9 / 4 - 6 * b1}")
    elif mode == "nonlinear":
        if not b0 >= 3 / 2 - 4 * b1:
            msgs.append(f"beta0={b0} < 3/2 - 4*beta1 = {3 / 2 - 4 * b1}")
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return (not msgs, "; ".join(msgs) or "ok")
