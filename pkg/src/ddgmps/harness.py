"""Experiment runner: meshes, time loops, error tables, and field export.

``run_experiment`` drives a mesh-refinement study for one problem: project
the initial data, integrate to the final time with SSP-RK3 (limiting each
stage), and report L2 / Linf errors plus exact per-cell solution extrema
against the known bounds.  Everything is deterministic for a fixed config.
"""

from __future__ import annotations

import dataclasses
import io
import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import __version__, assembly, limiter, poisson, poly2, problems, timestep
from .mesh import TriMesh, generate_structured, load_mesh
from .poly2 import DGField
from .problems import ProblemSpec, VelocityConvection
from .quadrature import triangle_rule


class HarnessError(RuntimeError):
    pass


# default per-problem experiment scale: resolution n means an n x n
# structured grid of the problem's domain split into 2 n^2 triangles,
# i.e. a unit-square-equivalent mesh size sqrt(2)/n
@dataclass
class ExperimentConfig:
    problem: str
    resolutions: tuple[int, ...]
    final_time: float
    problem_params: dict = dc_field(default_factory=dict)
    pattern: str = "uniform"             # uniform | obtuse
    mesh_file: Optional[str] = None      # overrides the generator (1 level)
    use_limiter: bool = True
    use_slope_limiter: Optional[bool] = None   # default: whatever the problem says
    dt_policy: str = "practical"         # practical | certified | user
    user_dt: Optional[float] = None
    limiter_frequency: str = "per_stage"  # per_stage | per_step
    snapshot_times: tuple[float, ...] = ()
    output_dir: Optional[str] = None
    seed: int = 0
    scheme_overrides: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if len(self.resolutions) < 1:
            raise ValueError("need at least one refinement level")
        if not self.final_time > 0:
            raise ValueError("final time must be positive")
        if self.pattern not in ("uniform", "obtuse"):
            raise ValueError(f"unknown mesh pattern {self.pattern!r}")
        if self.dt_policy not in ("practical", "certified", "user"):
            raise ValueError(f"unknown dt policy {self.dt_policy!r}")
        if self.dt_policy == "user" and not self.user_dt:
            raise ValueError("dt policy 'user' needs user_dt")
        if self.limiter_frequency not in ("per_stage", "per_step"):
            raise ValueError(
                f"unknown limiter frequency {self.limiter_frequency!r}")


@dataclass
class LevelReport:
    h: float                     # unit-square-equivalent mesh size
    n_cells: int
    dt: float
    steps: int
    l2_error: Optional[float]
    linf_error: Optional[float]
    min_violation: float         # u_min - m(t_final)
    max_violation: float         # u_max - M(t_final)
    mass_drift: float            # |sum area*avg - initial| / max(|initial|, 1)
    snapshots: dict              # time -> (u_min, u_max)


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    levels: list[LevelReport]
    l2_orders: list[Optional[float]]
    linf_orders: list[Optional[float]]

    def rows(self) -> list[dict]:
        out = []
        for i, lv in enumerate(self.levels):
            out.append(dict(
                h=lv.h, n_cells=lv.n_cells, dt=lv.dt, steps=lv.steps,
                l2_error=lv.l2_error,
                l2_order=self.l2_orders[i - 1] if i > 0 else None,
                linf_error=lv.linf_error,
                linf_order=self.linf_orders[i - 1] if i > 0 else None,
                min_violation=lv.min_violation,
                max_violation=lv.max_violation,
                mass_drift=lv.mass_drift))
        return out


def observed_order(errors, hs) -> list[Optional[float]]:
    """order_i = log(e_{i-1}/e_i) / log(h_{i-1}/h_i); None when undefined."""
    errors = list(errors)
    hs = list(hs)
    if len(errors) != len(hs) or len(errors) < 2:
        raise ValueError("need two or more matching error/h entries")
    out: list[Optional[float]] = []
    for i in range(1, len(errors)):
        e0, e1, h0, h1 = errors[i - 1], errors[i], hs[i - 1], hs[i]
        if e0 is None or e1 is None or e0 <= 0 or e1 <= 0:
            out.append(None)
        else:
            out.append(math.log(e0 / e1) / math.log(h0 / h1))
    return out


# ---------------------------------------------------------------------------
# time-step selection

# empirical diffusion stability number for the third-order scheme with
# (beta0, beta1) = (5, 1/8): dt <= LAMBDA_DIFF * min area / max|A|
# (0.01 was found stable and 0.02 unstable on uniform refinements)
LAMBDA_DIFF = 0.006
# convective CFL for quadratic elements (the classic 1/(2k+1) guideline
# with a safety margin)
CONV_CFL = 0.1


def practical_dt(mesh: TriMesh, diffusion_speed: float,
                 convection_speed: float) -> float:
    """Heuristic stable step from the measured stability numbers.

    The diffusion and convection restrictions are combined harmonically,
    which is conservative when both mechanisms are active.
    """
    inv = 0.0
    if diffusion_speed > 0:
        inv += diffusion_speed / (LAMBDA_DIFF * float(mesh.areas.min()))
    if convection_speed > 0:
        inv += convection_speed / (CONV_CFL * float(mesh.inradii.min()))
    if inv == 0.0:
        raise HarnessError("problem has neither diffusion nor convection")
    return 1.0 / inv


def _diffusion_speed(problem: ProblemSpec) -> float:
    if problem.diffusion is None:
        return 0.0
    m, M = problem.bounds.lower(0.0), problem.bounds.upper(0.0)
    u = np.linspace(m, M, 101)
    A = problem.diffusion(u)                      # (101, 2, 2)
    # the interface penalty beta0 [u]/h is not scaled by A, so its
    # stiffness is order one even when the diffusion coefficient is small;
    # never report a speed below the unit-coefficient reference
    return max(1.0, float(np.abs(np.linalg.eigvalsh(A)).max()))


def _convection_speed(problem: ProblemSpec, mesh: TriMesh,
                      fld: DGField) -> float:
    conv = problem.convection
    if conv is None:
        return 0.0
    if isinstance(conv, VelocityConvection):
        # transport speed from the initial stream function, with headroom
        phi = poisson.stream_function(mesh, fld)
        vel = poisson.velocity_field(phi)
        V = vel.on_cells(triangle_rule(4).points)
        return 1.5 * float(np.linalg.norm(V, axis=-1).max())
    m, M = problem.bounds.lower(0.0), problem.bounds.upper(0.0)
    u = np.linspace(m, M, 101)
    dF = conv.dflux(u, np.zeros(u.shape + (2,)))
    return float(np.linalg.norm(dF, axis=-1).max())


# ---------------------------------------------------------------------------
# single-level integration

def _make_rhs(mesh: TriMesh, problem: ProblemSpec, scheme) -> Callable:
    conv = problem.convection
    if isinstance(conv, VelocityConvection):
        warm: dict = {"phi": None}

        def rhs(f: DGField) -> np.ndarray:
            phi = poisson.stream_function(mesh, f,
                                          initial_guess=warm["phi"])
            warm["phi"] = phi.coeffs
            vel = poisson.velocity_field(phi)
            vel.bind_assembly(scheme)
            conv.set_velocity(vel)
            return assembly.spatial_residual(mesh, f, problem, scheme).rates
        return rhs

    def rhs(f: DGField) -> np.ndarray:
        return assembly.spatial_residual(mesh, f, problem, scheme).rates
    return rhs


def _make_post_stage(mesh: TriMesh, problem: ProblemSpec, use_limiter: bool,
                     use_slope: bool):
    slope_params = problem.slope_limiter if use_slope else None
    if not use_limiter and slope_params is None:
        return None

    def post(f: DGField) -> None:
        if slope_params is not None:
            limiter.slope_limit(f, mesh, slope_params)
        if use_limiter:
            limiter.mps_limit(f, mesh, problem.bounds)
    return post


def integrate(mesh: TriMesh, problem: ProblemSpec, scheme, fld: DGField,
              t_final: float, dt: float, post_stage=None,
              snapshot_times=(), on_snapshot=None,
              limiter_frequency: str = "per_stage") -> tuple[DGField, int]:
    """March ``fld`` to ``t_final`` with SSP-RK3, landing on snapshots.

    ``on_snapshot(t, field)`` fires at each snapshot time and at t_final.
    Returns the final field and the total number of steps taken.
    ``limiter_frequency`` = "per_stage" passes the hook to every RK stage;
    "per_step" applies it only after each complete RK step.
    """
    rhs = _make_rhs(mesh, problem, scheme)
    per_stage = limiter_frequency == "per_stage"
    stage_hook = post_stage if per_stage else None
    stops = sorted(set(t for t in snapshot_times if 0 < t <= t_final))
    if not stops or stops[-1] < t_final:
        stops.append(t_final)
    total = 0
    for stop in stops:
        span = stop - fld.time_stamp
        if span <= 1e-14 * max(1.0, t_final):
            fld.time_stamp = stop
        else:
            n = max(1, math.ceil(span / dt - 1e-12))
            local_dt = span / n
            for _ in range(n):
                fld = timestep.ssp_rk3_step(fld, local_dt, rhs, stage_hook)
                if not per_stage and post_stage is not None:
                    post_stage(fld)
            total += n
            fld.time_stamp = stop        # kill accumulation round-off
        if on_snapshot is not None:
            on_snapshot(stop, fld)
    return fld, total


# ---------------------------------------------------------------------------
# error measurement

_L2_RULE = triangle_rule(5)
# Linf sampling lattice: the degree-5 points plus vertices and edge midpoints
_LINF_BARY = np.vstack([
    _L2_RULE.points,
    np.eye(3),
    np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]),
])


def compute_errors(mesh: TriMesh, fld: DGField, exact,
                   t: float) -> tuple[float, float]:
    """(L2, Linf) error against ``exact(x, y, t)``."""
    lam = _LINF_BARY
    B = poly2.basis_values(lam[:, 0], lam[:, 1])
    phys = np.einsum("qk,nkd->nqd", lam, mesh.vertices[mesh.cells])
    uh = fld.coeffs @ B.T
    ue = exact(phys[..., 0], phys[..., 1], t)
    diff = uh - ue
    nq = len(_L2_RULE.weights)
    l2 = math.sqrt(float((mesh.areas[:, None] * _L2_RULE.weights[None, :]
                          * diff[:, :nq] ** 2).sum()))
    linf = float(np.abs(diff).max())
    return l2, linf


def solution_extrema(mesh: TriMesh, fld: DGField) -> tuple[float, float]:
    """Exact global (min, max) over all cell polynomials."""
    lo, hi = poly2.extrema_coeffs(fld.coeffs)
    return float(lo.min()), float(hi.max())


def total_mass(mesh: TriMesh, fld: DGField) -> float:
    return float(mesh.areas @ fld.averages())


# ---------------------------------------------------------------------------
# experiment driver

def _build_mesh(cfg: ExperimentConfig, problem: ProblemSpec,
                n: int) -> TriMesh:
    if cfg.mesh_file is not None:
        return load_mesh(cfg.mesh_file)
    periodic = problem.boundary == problems.PERIODIC
    return generate_structured(n, n, domain=problem.domain,
                               pattern=cfg.pattern, periodic=periodic)


def run_level(cfg: ExperimentConfig, problem: ProblemSpec,
              n: int) -> LevelReport:
    mesh = _build_mesh(cfg, problem, n)
    scheme = assembly.default_config(problem, **cfg.scheme_overrides)
    fld = poly2.project_field(problem.initial, mesh, scheme.volume_rule)
    use_slope = (cfg.use_slope_limiter
                 if cfg.use_slope_limiter is not None
                 else problem.slope_limiter is not None)
    post = _make_post_stage(mesh, problem, cfg.use_limiter, use_slope)
    if post is not None:
        post(fld)

    if cfg.dt_policy == "user":
        dt = cfg.user_dt
    elif cfg.dt_policy == "certified":
        mode = ("linear_thm" if problem.diffusion_mode == "linear"
                else "nonlinear_thm")
        from .quadrature import min_selected_weight
        w0 = None if mode == "linear_thm" else min_selected_weight(mesh)
        dt = timestep.compute_dt(mesh, timestep.CflParams(mode=mode),
                                 scheme.flux_params, w0=w0)
    else:
        dt = practical_dt(mesh, _diffusion_speed(problem),
                          _convection_speed(problem, mesh, fld))

    mass0 = total_mass(mesh, fld)
    snapshots: dict[float, tuple[float, float]] = {}

    def on_snapshot(t, f):
        snapshots[t] = solution_extrema(mesh, f)

    fld, steps = integrate(mesh, problem, scheme, fld, cfg.final_time, dt,
                           post_stage=post,
                           snapshot_times=cfg.snapshot_times,
                           on_snapshot=on_snapshot,
                           limiter_frequency=cfg.limiter_frequency)

    t = cfg.final_time
    if problem.exact is not None:
        l2, linf = compute_errors(mesh, fld, problem.exact, t)
    else:
        l2 = linf = None
    u_min, u_max = solution_extrema(mesh, fld)
    mass1 = total_mass(mesh, fld)

    # unit-square-equivalent mesh size: actual diameter over domain width
    x0, x1, y0, y1 = problem.domain
    h_unit = mesh.h / max(x1 - x0, y1 - y0)

    report = LevelReport(
        h=h_unit, n_cells=mesh.n_cells, dt=dt, steps=steps,
        l2_error=l2, linf_error=linf,
        min_violation=u_min - problem.bounds.lower(t),
        max_violation=u_max - problem.bounds.upper(t),
        mass_drift=abs(mass1 - mass0) / max(abs(mass0), 1.0),
        snapshots=snapshots)
    report.final_field = fld          # handy for callers; not in the table
    report.mesh = mesh
    return report


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    problem = problems.by_name(cfg.problem, **cfg.problem_params)
    levels = [run_level(cfg, problem, n) for n in cfg.resolutions]
    hs = [lv.h for lv in levels]
    if len(levels) >= 2:
        l2o = observed_order([lv.l2_error for lv in levels], hs)
        lio = observed_order([lv.linf_error for lv in levels], hs)
    else:
        l2o, lio = [], []
    report = ExperimentReport(cfg, levels, l2o, lio)
    if cfg.output_dir is not None:
        write_report(report, Path(cfg.output_dir))
    return report


# ---------------------------------------------------------------------------
# output

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.10e}"
    return str(v)


def report_csv(report: ExperimentReport) -> str:
    cols = ["h", "n_cells", "dt", "steps", "l2_error", "l2_order",
            "linf_error", "linf_order", "min_violation", "max_violation",
            "mass_drift"]
    buf = io.StringIO()
    buf.write(",".join(cols) + "\n")
    for row in report.rows():
        buf.write(",".join(_fmt(row[c]) for c in cols) + "\n")
    return buf.getvalue()


def write_report(report: ExperimentReport, outdir: Path) -> None:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "table.csv").write_text(report_csv(report))
    meta = [f"version = {__version__}",
            "linf_sampling = degree5-points+vertices+edge-midpoints",
            "l2_rule = degree5"]
    for f in dataclasses.fields(report.config):
        meta.append(f"{f.name} = {getattr(report.config, f.name)!r}")
    for i, lv in enumerate(report.levels):
        meta.append(f"level{i}_dt = {lv.dt!r}")
        meta.append(f"level{i}_steps = {lv.steps}")
        for t, (lo, hi) in sorted(lv.snapshots.items()):
            meta.append(f"level{i}_extrema_t{t:g} = {lo!r} {hi!r}")
    (outdir / "metadata.txt").write_text("\n".join(meta) + "\n")
    for i, lv in enumerate(report.levels):
        export_field(lv.final_field, lv.mesh,
                     outdir / f"field_level{i}.csv", "csv")


# per-cell sample lattice for csv export: vertices + edge midpoints
_CSV_BARY = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0],
                      [0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])


def export_field(fld: DGField, mesh: TriMesh, path, format: str) -> None:
    path = Path(path)
    if format == "csv":
        B = poly2.basis_values(_CSV_BARY[:, 0], _CSV_BARY[:, 1])
        phys = np.einsum("qk,nkd->nqd", _CSV_BARY, mesh.vertices[mesh.cells])
        vals = fld.coeffs @ B.T
        with path.open("w") as f:
            f.write("x,y,value\n")
            for c in range(mesh.n_cells):
                for q in range(len(_CSV_BARY)):
                    f.write(f"{phys[c, q, 0]:.12e},{phys[c, q, 1]:.12e},"
                            f"{vals[c, q]:.12e}\n")
    elif format == "vtk_legacy":
        _export_vtk(fld, mesh, path)
    else:
        raise ValueError(f"unknown export format {format!r}")


def _export_vtk(fld: DGField, mesh: TriMesh, path: Path) -> None:
    # vertex values: average of the DG traces of all cells touching a vertex
    nv = mesh.n_vertices
    vals = np.zeros(nv)
    counts = np.zeros(nv)
    corner = fld.coeffs @ poly2.basis_values(
        np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])).T  # (nc, 3)
    np.add.at(vals, mesh.cells.ravel(), corner.ravel())
    np.add.at(counts, mesh.cells.ravel(), 1.0)
    vals /= np.maximum(counts, 1.0)
    avg = fld.averages()
    with Path(path).open("w") as f:
        f.write("# vtk DataFile Version 3.0\n")
        f.write("dg field snapshot\nASCII\nDATASET UNSTRUCTURED_GRID\n")
        f.write(f"POINTS {nv} double\n")
        for x, y in mesh.vertices:
            f.write(f"{x:.12e} {y:.12e} 0.0\n")
        f.write(f"CELLS {mesh.n_cells} {4 * mesh.n_cells}\n")
        for a, b, c in mesh.cells:
            f.write(f"3 {a} {b} {c}\n")
        f.write(f"CELL_TYPES {mesh.n_cells}\n")
        f.write("\n".join(["5"] * mesh.n_cells) + "\n")
        f.write(f"POINT_DATA {nv}\nSCALARS value double 1\n")
        f.write("LOOKUP_TABLE default\n")
        for v in vals:
            f.write(f"{v:.12e}\n")
        f.write(f"CELL_DATA {mesh.n_cells}\nSCALARS average double 1\n")
        f.write("LOOKUP_TABLE default\n")
        for v in avg:
            f.write(f"{v:.12e}\n")
