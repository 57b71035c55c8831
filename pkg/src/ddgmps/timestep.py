"""Explicit integrators and certified CFL step sizes.

``cfl_A_linear`` and ``cfl_A_nonlinear`` evaluate the closed-form constants
bounding lambda = dt / area(K) for the bound-preserving forward-Euler step;
``compute_dt`` turns them into a concrete step; ``ssp_rk3_step`` is the
three-stage strong-stability-preserving Runge-Kutta update, each stage a
convex combination of forward-Euler steps.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .flux import FluxParams
from .mesh import TriMesh
from .poly2 import DGField

W1 = 2.0 / 81.0


@dataclass
class CflParams:
    safety: float = 0.9
    mode: str = "linear_thm"      # linear_thm | nonlinear_thm | convection_combined
    user_dt: Optional[float] = None

    def __post_init__(self):
        if not 0.0 < self.safety <= 1.0:
            raise ValueError("safety must be in (0, 1]")
        if self.mode not in ("linear_thm", "nonlinear_thm",
                             "convection_combined"):
            raise ValueError(f"unknown CFL mode {self.mode!r}")


def _safe_div(num: float, den: float) -> float:
    return math.inf if den <= 0.0 else num / den


def cfl_A_linear(beta0: float, beta1: float, theta_min: float,
                 theta_max: float) -> float:
    """Certified lambda bound for the linear diffusion step.

    Branches whose denominators vanish (beta1 at the ends of [1/8, 1/4])
    evaluate to +inf and drop out of the min.
    """
    tan_hat = math.tan(theta_min)
    tan_check = math.tan(theta_max)
    ratio = math.inf if tan_check <= 0 else tan_hat / tan_check
    inner = min(_safe_div(1.0, 6.0 * (8.0 * beta1 - 1.0)),
                _safe_div(W1, 8.0 * (beta0 - 9.0 / 4.0 + 6.0 * beta1)),
                _safe_div(W1, 4.0 * beta0))
    return tan_hat * min(_safe_div(W1, 72.0 * (1.0 - 4.0 * beta1)),
                         ratio * inner)


def cfl_A_nonlinear(beta0: float, beta1: float, theta_min: float,
                    w0: float) -> float:
    """Certified lambda bound for the nonlinear (matrix) diffusion step."""
    if not w0 > 0:
        raise ValueError("w0 must be positive")
    return (math.sin(theta_min) * ((3.0 - math.sqrt(3.0)) / 3.0) * w0
            * min(1.0 / (2.0 * beta0 + 8.0 * beta1 + 3.0),
                  1.0 / (8.0 * beta1 + 1.0)))


def compute_dt(mesh: TriMesh, params: CflParams, flux_params: FluxParams,
               w0: float | None = None,
               alpha: float | None = None) -> float:
    """Step size from the theorem constants (optionally convection-capped).

    ``w0`` is the minimum selected-point quadrature weight (required for the
    nonlinear modes); ``alpha`` the global convection speed bound used by
    the ``convection_combined`` cap dt <= safety * min inradius / alpha.
    """
    if params.mode == "linear_thm":
        A = cfl_A_linear(flux_params.beta0, flux_params.beta1,
                         mesh.theta_min, mesh.theta_max)
    else:
        if w0 is None:
            raise ValueError("nonlinear CFL requires the minimum quadrature "
                             "weight w0")
        A = cfl_A_nonlinear(flux_params.beta0, flux_params.beta1,
                            mesh.theta_min, w0)
    dt = params.safety * A * float(mesh.areas.min())
    if params.mode == "convection_combined":
        if alpha is None or alpha <= 0:
            raise ValueError("convection_combined needs a positive alpha")
        dt = min(dt, params.safety * float(mesh.inradii.min()) / alpha)
    if params.user_dt is not None:
        if math.isfinite(dt) and params.user_dt > dt:
            warnings.warn(
                f"user dt {params.user_dt:g} exceeds the certified bound "
                f"{dt:g}; bound preservation is not guaranteed")
        return params.user_dt
    if not math.isfinite(dt) or dt <= 0:
        raise ValueError(
            f"degenerate certified step {dt!r} (mesh angles "
            f"{math.degrees(mesh.theta_min):.1f}deg/"
            f"{math.degrees(mesh.theta_max):.1f}deg); supply user_dt")
    return dt


def forward_euler_step(state: DGField, dt: float,
                       rhs: Callable[[DGField], np.ndarray],
                       post_stage=None) -> DGField:
    out = DGField(state.coeffs + dt * rhs(state), state.time_stamp + dt)
    if post_stage is not None:
        post_stage(out)
    return out


def ssp_rk3_step(state: DGField, dt: float,
                 rhs: Callable[[DGField], np.ndarray],
                 post_stage=None) -> DGField:
    """Three-stage SSP Runge-Kutta update (Shu-Osher form).

    ``rhs(field) -> (nc, 6) rates``; ``post_stage`` (e.g. a limiter) is
    applied to each intermediate field, which is itself the result of a
    forward-Euler substep, so stage-wise bound preservation is inherited.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    t0 = state.time_stamp

    def stage(coeffs, t, idx):
        f = DGField(coeffs, t)
        if not np.all(np.isfinite(coeffs)):
            raise FloatingPointError(f"non-finite state entering RK stage "
                                     f"{idx} at t={t}")
        if post_stage is not None:
            post_stage(f)
        return f

    u1 = stage(state.coeffs + dt * rhs(state), t0 + dt, 1)
    u2 = stage(0.75 * state.coeffs + 0.25 * (u1.coeffs + dt * rhs(u1)),
               t0 + 0.5 * dt, 2)
    out = stage((state.coeffs + 2.0 * (u2.coeffs + dt * rhs(u2))) / 3.0,
                t0 + dt, 3)
    return out
