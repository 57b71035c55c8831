"""Problem catalog: coefficients, initial/exact data, and solution bounds.

Every problem is a :class:`ProblemSpec` bundle of pure callbacks.  The
callbacks are vectorized over numpy arrays.  The convection flux may depend
on position (needed for the vorticity transport problem whose velocity field
is recomputed each stage and injected through ``set_velocity``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

PERIODIC = "periodic"
DIRICHLET_ZERO = "dirichlet_zero"


@dataclass
class Bounds:
    """Time-dependent solution bounds [lower(t), upper(t)]."""

    lower: Callable[[float], float]
    upper: Callable[[float], float]

    @staticmethod
    def constant(m: float, M: float) -> "Bounds":
        return Bounds(lambda t: m, lambda t: M)


@dataclass
class SlopeLimiterParams:
    gamma: float = 1.5
    m_tvb: float = 5.0

    def __post_init__(self):
        if self.gamma < 1 or self.m_tvb < 0:
            raise ValueError("need gamma >= 1 and m_tvb >= 0")


@dataclass
class Convection:
    """Convection flux F(u; x) and its u-derivative, vectorized.

    ``flux(u, pts)`` returns shape u.shape + (2,), ``dflux`` likewise for
    F'(u).  ``pts`` has shape u.shape + (2,) and may be ignored by
    position-independent fluxes.
    """

    flux: Callable[[np.ndarray, np.ndarray], np.ndarray]
    dflux: Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass
class ProblemSpec:
    name: str
    domain: tuple[float, float, float, float]
    boundary: str
    initial: Callable[[np.ndarray, np.ndarray], np.ndarray]
    bounds: Bounds
    diffusion: Optional[Callable[[np.ndarray], np.ndarray]] = None
    convection: Optional[Convection] = None
    exact: Optional[Callable[[np.ndarray, np.ndarray, float], np.ndarray]] = None
    diffusion_mode: str = "nonlinear"     # which coefficient condition applies
    slope_limiter: Optional[SlopeLimiterParams] = None
    extra: dict = field(default_factory=dict)

    def periods(self) -> Optional[tuple[float, float]]:
        if self.boundary != PERIODIC:
            return None
        x0, x1, y0, y1 = self.domain
        return (x1 - x0, y1 - y0)


def _iso(a: np.ndarray) -> np.ndarray:
    """Scalar coefficient a(u) -> matrix a(u)*I with shape u.shape + (2,2)."""
    a = np.asarray(a, dtype=float)
    out = np.zeros(a.shape + (2, 2))
    out[..., 0, 0] = a
    out[..., 1, 1] = a
    return out


def linear_diffusion(epsilon: float = 1.0) -> ProblemSpec:
    """Heat equation with a traveling-wave-in-space sine exact solution."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    decay = 8 * math.pi ** 2 * epsilon

    def initial(x, y):
        return np.sin(2 * math.pi * (x + y))

    def exact(x, y, t):
        return math.exp(-decay * t) * np.sin(2 * math.pi * (x + y))

    return ProblemSpec(
        name="linear_diffusion",
        domain=(0.0, 1.0, 0.0, 1.0),
        boundary=PERIODIC,
        initial=initial,
        exact=exact,
        diffusion=lambda u: _iso(np.full(np.shape(u), epsilon)),
        bounds=Bounds(lambda t: -math.exp(-decay * t),
                      lambda t: math.exp(-decay * t)),
        diffusion_mode="linear",
        extra={"epsilon": epsilon},
    )


def porous_medium() -> ProblemSpec:
    """Degenerate diffusion of u^2: A(u) = 2u I, two-bump indicator data."""

    def initial(x, y):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        inside = (((x - 2) ** 2 + (y + 2) ** 2 < 6)
                  | ((x + 2) ** 2 + (y - 2) ** 2 < 6))
        return inside.astype(float)

    return ProblemSpec(
        name="porous_medium",
        domain=(-10.0, 10.0, -10.0, 10.0),
        boundary=DIRICHLET_ZERO,
        initial=initial,
        diffusion=lambda u: _iso(2.0 * np.asarray(u, float)),
        bounds=Bounds.constant(0.0, 1.0),
        diffusion_mode="nonlinear",
    )


def strongly_degenerate(epsilon: float = 0.1) -> ProblemSpec:
    """Burgers-type convection with on/off diffusion nu(u) = 1_{|u|>1/4}."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")

    def nu(u):
        return (np.abs(np.asarray(u, float)) > 0.25).astype(float)

    def initial(x, y):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        out = np.zeros(np.broadcast(x, y).shape)
        out = np.where((x + 0.5) ** 2 + (y + 0.5) ** 2 < 0.16, 1.0, out)
        out = np.where((x - 0.5) ** 2 + (y - 0.5) ** 2 < 0.16, -1.0, out)
        return out

    def conv_flux(u, pts=None):
        u = np.asarray(u, float)
        return np.stack([u * u, u * u], axis=-1)

    def conv_dflux(u, pts=None):
        u = np.asarray(u, float)
        return np.stack([2 * u, 2 * u], axis=-1)

    return ProblemSpec(
        name="strongly_degenerate",
        domain=(-1.5, 1.5, -1.5, 1.5),
        boundary=DIRICHLET_ZERO,
        initial=initial,
        diffusion=lambda u: _iso(epsilon * nu(u)),
        convection=Convection(conv_flux, conv_dflux),
        bounds=Bounds.constant(-1.0, 1.0),
        diffusion_mode="nonlinear",
        slope_limiter=SlopeLimiterParams(gamma=1.5, m_tvb=5.0),
        extra={"epsilon": epsilon, "nu": nu},
    )


class VelocityConvection(Convection):
    """Linear transport by an externally supplied velocity field.

    The vorticity-stream coupling updates ``evaluate`` before every residual
    evaluation; ``flux(u, pts) = V(pts) * u`` and ``dflux = V(pts)``.
    """

    def __init__(self):
        self._velocity = None
        super().__init__(self._flux, self._dflux)

    def set_velocity(self, evaluate) -> None:
        """``evaluate(pts) -> velocity array pts.shape`` (single-valued)."""
        self._velocity = evaluate

    def _vel(self, pts):
        if self._velocity is None:
            raise RuntimeError("velocity field not set for transport flux")
        return self._velocity(np.asarray(pts, float))

    def _flux(self, u, pts):
        return self._vel(pts) * np.asarray(u, float)[..., None]

    def _dflux(self, u, pts):
        v = self._vel(pts)
        return np.broadcast_to(v, np.shape(u) + (2,))


def ns_vorticity(reynolds: float, variant: str = "accuracy") -> ProblemSpec:
    """Vorticity transport with stream-function velocity and 1/Re diffusion."""
    if not reynolds > 0:
        raise ValueError("reynolds must be positive")
    two_pi = 2 * math.pi
    conv = VelocityConvection()

    if variant == "accuracy":
        def initial(x, y):
            return -2.0 * np.sin(x) * np.sin(y)

        def exact(x, y, t):
            return -2.0 * np.sin(x) * np.sin(y) * math.exp(-2 * t / reynolds)

        bounds = Bounds(lambda t: -2.0 * math.exp(-2 * t / reynolds),
                        lambda t: 2.0 * math.exp(-2 * t / reynolds))
    elif variant == "vortex_patch":
        def initial(x, y):
            x = np.asarray(x, float)
            y = np.asarray(y, float)
            out = np.zeros(np.broadcast(x, y).shape)
            band = (x >= math.pi / 2) & (x <= 3 * math.pi / 2)
            out = np.where(band & (y >= math.pi / 4)
                           & (y <= 3 * math.pi / 4), -1.0, out)
            out = np.where(band & (y >= 5 * math.pi / 4)
                           & (y <= 7 * math.pi / 4), 1.0, out)
            return out

        exact = None
        bounds = Bounds.constant(-1.0, 1.0)
    else:
        raise ValueError(f"unknown variant {variant!r}")

    return ProblemSpec(
        name=f"ns_vorticity_{variant}",
        domain=(0.0, two_pi, 0.0, two_pi),
        boundary=PERIODIC,
        initial=initial,
        exact=exact,
        diffusion=lambda u: _iso(np.full(np.shape(u), 1.0 / reynolds)),
        convection=conv,
        bounds=bounds,
        diffusion_mode="linear",
        extra={"reynolds": reynolds, "velocity_convection": conv},
    )


_CATALOG = {
    "linear_diffusion": linear_diffusion,
    "porous_medium": porous_medium,
    "strongly_degenerate": strongly_degenerate,
}


def by_name(name: str, **kwargs) -> ProblemSpec:
    if name.startswith("ns_vorticity"):
        variant = name.removeprefix("ns_vorticity").strip("_") or "accuracy"
        return ns_vorticity(kwargs.pop("reynolds", 100.0), variant, **kwargs)
    if name not in _CATALOG:
        raise KeyError(f"unknown problem {name!r}")
    return _CATALOG[name](**kwargs)
