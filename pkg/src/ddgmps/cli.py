"""Command-line client for the experiment service.

Every subcommand builds a request and posts it to the HTTP service — by
default an in-process instance of the FastAPI app (no network), or a remote
one via ``--server URL``.
"""

from __future__ import annotations

import json
import sys

import click
import httpx


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=None)
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    from .service import app
    return TestClient(app)


def _post(ctx, path: str, payload: dict) -> dict:
    with _client(ctx.obj.get("server")) as client:
        resp = client.post(path, json=payload)
    if resp.status_code != 200:
        try:
            detail = resp.json().get("detail", resp.text)
        except ValueError:
            detail = resp.text
        click.echo(f"error ({resp.status_code}): {detail}", err=True)
        sys.exit(1)
    return resp.json()


def _print_experiment(data: dict, as_json: bool) -> None:
    if as_json:
        click.echo(json.dumps(data, indent=2))
    else:
        click.echo(data["csv"].rstrip("\n"))


@click.group()
@click.option("--server", default=None, metavar="URL",
              help="Remote service URL (default: run in-process).")
@click.pass_context
def main(ctx, server):
    """Bound-preserving DG convection-diffusion experiments."""
    ctx.ensure_object(dict)
    ctx.obj["server"] = server


def _experiment_options(f):
    for opt in reversed([
        click.option("--levels", default=None, type=int,
                     help="Truncate the refinement family to this many levels."),
        click.option("--limiter/--no-limiter", "use_limiter", default=True),
        click.option("--dt", "user_dt", default=None, type=float,
                     help="Fixed time step (overrides the stability heuristic)."),
        click.option("--output-dir", default=None,
                     help="Write table.csv, metadata.txt and field snapshots here."),
        click.option("--json", "as_json", is_flag=True,
                     help="Print the full JSON response."),
    ]):
        f = opt(f)
    return f


def _base_request(resolutions, final_time, use_limiter, user_dt, output_dir,
                  levels):
    if levels is not None:
        resolutions = resolutions[:max(1, levels)]
    req = dict(resolutions=list(resolutions), final_time=final_time,
               use_limiter=use_limiter, output_dir=output_dir)
    if user_dt is not None:
        req["dt_policy"] = "user"
        req["user_dt"] = user_dt
    return req


@main.command()
@click.option("--pattern", type=click.Choice(["uniform", "obtuse"]),
              default="uniform")
@click.option("--final-time", default=1e-4, type=float, show_default=True)
@_experiment_options
@click.pass_context
def accuracy(ctx, pattern, final_time, use_limiter, user_dt, output_dir,
             levels, as_json):
    """Heat-equation refinement study (third-order convergence tables)."""
    req = _base_request((12, 24, 48, 96), final_time, use_limiter, user_dt,
                        output_dir, levels)
    req.update(problem="linear_diffusion", pattern=pattern)
    _print_experiment(_post(ctx, "/experiments", req), as_json)


@main.command()
@click.option("--resolution", default=24, type=int, show_default=True,
              help="Cells per side of the 20x20 domain.")
@click.option("--final-time", default=2.0, type=float, show_default=True)
@_experiment_options
@click.pass_context
def porous(ctx, resolution, final_time, use_limiter, user_dt, output_dir,
           levels, as_json):
    """Porous-medium equation with snapshot extrema at t = 0.1, 0.5, 2."""
    req = _base_request((resolution,), final_time, use_limiter, user_dt,
                        output_dir, levels)
    req.update(problem="porous_medium",
               snapshot_times=[t for t in (0.1, 0.5, 2.0) if t <= final_time])
    _print_experiment(_post(ctx, "/experiments", req), as_json)


@main.command()
@click.option("--resolution", default=48, type=int, show_default=True)
@click.option("--final-time", default=0.5, type=float, show_default=True)
@_experiment_options
@click.pass_context
def sdp(ctx, resolution, final_time, use_limiter, user_dt, output_dir,
        levels, as_json):
    """Strongly degenerate parabolic problem (Burgers convection, on/off
    diffusion) with the slope limiter."""
    req = _base_request((resolution,), final_time, use_limiter, user_dt,
                        output_dir, levels)
    req.update(problem="strongly_degenerate")
    _print_experiment(_post(ctx, "/experiments", req), as_json)


@main.command("ns-accuracy")
@click.option("--reynolds", default=100.0, type=float, show_default=True)
@click.option("--pattern", type=click.Choice(["uniform", "obtuse"]),
              default="uniform")
@click.option("--final-time", default=0.1, type=float, show_default=True)
@_experiment_options
@click.pass_context
def ns_accuracy(ctx, reynolds, pattern, final_time, use_limiter, user_dt,
                output_dir, levels, as_json):
    """Vorticity transport accuracy study with the exact decaying solution."""
    req = _base_request((12, 24, 48), final_time, use_limiter, user_dt,
                        output_dir, levels)
    req.update(problem="ns_vorticity_accuracy", pattern=pattern,
               problem_params={"reynolds": reynolds})
    _print_experiment(_post(ctx, "/experiments", req), as_json)


@main.command("ns-vortex")
@click.option("--reynolds", default=100.0, type=float, show_default=True)
@click.option("--final-time", default=0.1, type=float, show_default=True)
@_experiment_options
@click.pass_context
def ns_vortex(ctx, reynolds, final_time, use_limiter, user_dt, output_dir,
              levels, as_json):
    """Vortex-patch problem: overshoot/undershoot of the +-1 patches."""
    req = _base_request((12, 24), final_time, use_limiter, user_dt,
                        output_dir, levels)
    req.update(problem="ns_vorticity_vortex_patch",
               problem_params={"reynolds": reynolds})
    _print_experiment(_post(ctx, "/experiments", req), as_json)


@main.command()
@click.option("--triangles", default=1000, type=int, show_default=True)
@click.option("--weight-configs", default=100, type=int, show_default=True)
@click.option("--seed", default=0, type=int, show_default=True)
@click.pass_context
def quadcheck(ctx, triangles, weight_configs, seed):
    """Verify the vertex quadrature rule and the 12 stencil weights."""
    data = _post(ctx, "/quadcheck", dict(n_triangles=triangles,
                                         n_weight_configs=weight_configs,
                                         seed=seed))
    for k, v in data.items():
        click.echo(f"{k}: {v}")
    if not data["passed"]:
        sys.exit(1)


@main.command()
@click.option("--nx", default=12, type=int, show_default=True)
@click.option("--ny", default=12, type=int, show_default=True)
@click.option("--domain", nargs=4, type=float, default=(0.0, 1.0, 0.0, 1.0),
              show_default=True, metavar="X0 X1 Y0 Y1")
@click.option("--pattern",
              type=click.Choice(["uniform", "obtuse", "perturbed"]),
              default="uniform", show_default=True)
@click.option("--periodic", is_flag=True)
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--out", "path", default=None, help="Save the mesh here.")
@click.pass_context
def meshgen(ctx, nx, ny, domain, pattern, periodic, seed, path):
    """Generate a triangular mesh and print its statistics."""
    data = _post(ctx, "/meshgen", dict(nx=nx, ny=ny, domain=list(domain),
                                       pattern=pattern, periodic=periodic,
                                       seed=seed, path=path))
    for k, v in data.items():
        click.echo(f"{k}: {v}")


if __name__ == "__main__":
    main()
