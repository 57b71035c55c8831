"""HTTP service exposing the experiment runner.

A thin FastAPI layer over :mod:`ddgmps.harness`: one endpoint runs a
refinement study for any cataloged problem, one generates meshes, and one
runs the quadrature verification suite.  The CLI talks to this app
in-process by default, or to a remote instance of it.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__, harness, quadrature
from .mesh import MeshError, generate_perturbed, generate_structured, save_mesh


class ExperimentRequest(BaseModel):
    problem: str
    resolutions: list[int] = Field(min_length=1)
    final_time: float = Field(gt=0)
    problem_params: dict = Field(default_factory=dict)
    pattern: str = "uniform"
    mesh_file: Optional[str] = None
    use_limiter: bool = True
    use_slope_limiter: Optional[bool] = None
    dt_policy: str = "practical"
    user_dt: Optional[float] = None
    snapshot_times: list[float] = Field(default_factory=list)
    output_dir: Optional[str] = None
    seed: int = 0


class LevelRow(BaseModel):
    h: float
    n_cells: int
    dt: float
    steps: int
    l2_error: Optional[float] = None
    l2_order: Optional[float] = None
    linf_error: Optional[float] = None
    linf_order: Optional[float] = None
    min_violation: float
    max_violation: float
    mass_drift: float
    snapshots: dict[str, tuple[float, float]] = Field(default_factory=dict)


class ExperimentResponse(BaseModel):
    problem: str
    rows: list[LevelRow]
    csv: str


class QuadCheckRequest(BaseModel):
    n_triangles: int = 1000
    n_weight_configs: int = 100
    seed: int = 0


class QuadCheckResponse(BaseModel):
    mapped_rule_max_error: float
    vertex_weight_exact: bool
    selected_weights_min: float
    selected_weights_all_positive: bool
    lower_bounds_satisfied: bool
    passed: bool


class MeshGenRequest(BaseModel):
    nx: int = Field(gt=0)
    ny: int = Field(gt=0)
    domain: tuple[float, float, float, float] = (0.0, 1.0, 0.0, 1.0)
    pattern: str = "uniform"          # uniform | obtuse | perturbed
    periodic: bool = False
    seed: int = 0
    path: Optional[str] = None


class MeshGenResponse(BaseModel):
    n_vertices: int
    n_cells: int
    n_edges: int
    h: float
    theta_min_deg: float
    theta_max_deg: float
    path: Optional[str]


app = FastAPI(title="ddgmps", version=__version__)


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.post("/experiments", response_model=ExperimentResponse)
def run_experiment(req: ExperimentRequest) -> ExperimentResponse:
    try:
        cfg = harness.ExperimentConfig(
            problem=req.problem,
            resolutions=tuple(req.resolutions),
            final_time=req.final_time,
            problem_params=req.problem_params,
            pattern=req.pattern,
            mesh_file=req.mesh_file,
            use_limiter=req.use_limiter,
            use_slope_limiter=req.use_slope_limiter,
            dt_policy=req.dt_policy,
            user_dt=req.user_dt,
            snapshot_times=tuple(req.snapshot_times),
            output_dir=req.output_dir,
            seed=req.seed,
        )
        report = harness.run_experiment(cfg)
    except (ValueError, KeyError, harness.HarnessError) as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    rows = []
    for lv, row in zip(report.levels, report.rows()):
        row = dict(row)
        row["snapshots"] = {f"{t:g}": v for t, v in sorted(lv.snapshots.items())}
        rows.append(LevelRow(**row))
    return ExperimentResponse(problem=req.problem, rows=rows,
                              csv=harness.report_csv(report))


@app.post("/quadcheck", response_model=QuadCheckResponse)
def quadcheck(req: QuadCheckRequest) -> QuadCheckResponse:
    rng = np.random.default_rng(req.seed)
    result = quadrature.verification_suite(
        rng, n_triangles=req.n_triangles,
        n_weight_configs=req.n_weight_configs)
    return QuadCheckResponse(**result)


@app.post("/meshgen", response_model=MeshGenResponse)
def meshgen(req: MeshGenRequest) -> MeshGenResponse:
    try:
        if req.pattern == "perturbed":
            mesh = generate_perturbed(req.nx, req.ny,
                                      np.random.default_rng(req.seed),
                                      domain=req.domain,
                                      periodic=req.periodic)
        else:
            mesh = generate_structured(req.nx, req.ny, domain=req.domain,
                                       pattern=req.pattern,
                                       periodic=req.periodic)
    except (ValueError, MeshError) as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    if req.path:
        save_mesh(mesh, req.path)
    return MeshGenResponse(
        n_vertices=mesh.n_vertices, n_cells=mesh.n_cells,
        n_edges=mesh.n_edges, h=mesh.h,
        theta_min_deg=float(np.degrees(mesh.theta_min)),
        theta_max_deg=float(np.degrees(mesh.theta_max)),
        path=req.path)
