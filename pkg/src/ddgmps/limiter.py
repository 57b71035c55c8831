"""Solution limiters: bound-preserving linear scaling and a TVB slope limiter.

The scaling limiter compresses each cell polynomial toward its average just
enough that its exact extrema fall inside the prescribed bounds; it never
changes the cell average.  The slope limiter is the classic triangle
minmod-type limiter used to damp convection oscillations; it reduces flagged
cells to limited-linear polynomials.
"""

from __future__ import annotations

import numpy as np

from . import poly2
from .mesh import TriMesh
from .poly2 import AVG_WEIGHTS, DGField
from .problems import Bounds, SlopeLimiterParams

AVG_GUARD = 1e-11


class BoundViolationError(RuntimeError):
    """A cell average escaped the certified bounds (CFL violation)."""


def mps_limit(fld: DGField, mesh: TriMesh, bounds: Bounds,
              t: float | None = None) -> DGField:
    """Scale every cell polynomial into [m(t), M(t)]; modifies in place.

    Cell averages more than ``AVG_GUARD`` outside the bounds raise
    :class:`BoundViolationError`; drift within the guard is clamped.
    """
    if t is None:
        t = fld.time_stamp
    m = bounds.lower(t)
    M = bounds.upper(t)
    if not m < M:
        raise ValueError(f"empty bounds [{m}, {M}] at t={t}")
    c = fld.coeffs
    avg = c @ AVG_WEIGHTS

    low = avg < m
    high = avg > M
    if low.any() or high.any():
        worst = max((m - avg[low]).max() if low.any() else 0.0,
                    (avg[high] - M).max() if high.any() else 0.0)
        if worst > AVG_GUARD:
            bad = int(np.argmax(np.maximum(m - avg, avg - M)))
            raise BoundViolationError(
                f"cell {bad} average {avg[bad]!r} outside [{m}, {M}] "
                f"by {worst:.3e} at t={t} (time step too large?)")
        # float drift within the guard: clamp the average, keep the shape
        clamped = np.clip(avg, m, M)
        c[:, 0] += clamped - avg
        avg = clamped

    lo, hi = poly2.extrema_coeffs(c)
    over = hi > M
    under = lo < m
    need = over | under
    if not need.any():
        return fld

    d_hi = hi[need] - avg[need]
    d_lo = avg[need] - lo[need]
    with np.errstate(divide="ignore", invalid="ignore"):
        t_hi = np.where(d_hi > 0, np.abs((M - avg[need]) / d_hi), np.inf)
        t_lo = np.where(d_lo > 0, np.abs((avg[need] - m) / d_lo), np.inf)
    theta = np.minimum(1.0, np.minimum(t_hi, t_lo))
    c[need] = theta[:, None] * c[need]
    c[need, 0] += (1.0 - theta) * avg[need]
    return fld


def slope_limit(fld: DGField, mesh: TriMesh,
                params: SlopeLimiterParams) -> DGField:
    """TVB minmod slope limiter on edge-midpoint deviations; in place.

    For each cell the deviation of the solution at each edge midpoint from
    the cell average is compared with a forward difference of neighbor
    averages scaled by ``gamma``.  Cells whose deviations pass the TVB
    cutoff ``m_tvb * h^2`` are untouched; flagged cells are replaced by the
    average plus minmod-limited linear midpoint corrections.
    """
    c = fld.coeffs
    avg = c @ AVG_WEIGHTS
    nc = mesh.n_cells

    # solution at the 3 edge midpoints (barycentric midpoints of the sides)
    mid_b = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])
    Bm = poly2.basis_values(mid_b[:, 0], mid_b[:, 1])   # (3,6)
    u_mid = c @ Bm.T                                    # (nc,3)
    dev = u_mid - avg[:, None]

    # neighbor-average reconstruction: for local edge j, the difference of
    # the neighbor average (own average at boundaries) and the cell average
    nbr = mesh.neighbors                                # (nc,3), -1 boundary
    nbr_avg = np.where(nbr >= 0, avg[np.where(nbr >= 0, nbr, 0)],
                       avg[:, None] * np.ones((nc, 3)))
    d_nbr = params.gamma * 0.5 * (nbr_avg - avg[:, None])

    cutoff = params.m_tvb * mesh.diameters ** 2
    small = np.abs(dev) <= cutoff[:, None]

    same = np.sign(dev) == np.sign(d_nbr)
    limited = np.where(small, dev,
                       np.where(same,
                                np.sign(dev) * np.minimum(np.abs(dev),
                                                          np.abs(d_nbr)),
                                0.0))
    changed = np.any(np.abs(limited - dev) > 1e-14 * (1 + np.abs(dev)),
                     axis=1)
    if not changed.any():
        return fld

    # rebuild flagged cells as average + linear polynomial matching the
    # limited midpoint deviations; the three midpoint values of a linear
    # function determine it, and their mean equals the cell average
    shift = limited[changed] - limited[changed].mean(axis=1)[:, None]
    # linear basis {1, xi, eta} at midpoints: invert the 3x3 system
    L = np.array([[1.0, 0.5, 0.5], [1.0, 0.0, 0.5], [1.0, 0.5, 0.0]])
    coeffs_lin = np.linalg.solve(L, (avg[changed][:, None] + shift).T).T
    c[changed] = 0.0
    c[changed, 0:3] = coeffs_lin
    return fld
