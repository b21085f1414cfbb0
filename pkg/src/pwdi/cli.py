"""Command line entry point: ``pwdi interp-check | solve | convergence | nearfield``.

Every subcommand reads an optional JSON config (``--config``) and applies
flag overrides on top. Results go to stdout unless output paths are given.
Failures exit nonzero with a JSON error object on stderr.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from pwdi.experiments import (
    ConfigError,
    ExperimentConfig,
    rows_to_csv,
    run_convergence,
    run_interp_check,
    run_nearfield,
    run_solve,
)

log = logging.getLogger("pwdi")

EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _floats(text: str, name: str, n: int | None = None) -> list[float]:
    try:
        out = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"{name} must be comma-separated numbers") from None
    if n is not None and len(out) != n:
        raise ConfigError(f"{name} needs {n} components")
    return out


def _resolutions(text: str) -> list:
    out = []
    for tok in (t.strip() for t in text.split(",")):
        if not tok:
            continue
        try:
            out.append(int(tok))
        except ValueError:
            try:
                out.append(float(tok))
            except ValueError:
                out.append(tok)
    return out


def _emit_error(exc: BaseException, code: int) -> None:
    click.echo(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}), err=True)
    sys.exit(code)


def _write(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        click.echo(text, nl=False)


def _build_config(opts: dict) -> ExperimentConfig:
    path = opts.pop("config")
    base = ExperimentConfig.from_json(Path(path).read_text()) if path else ExperimentConfig()
    over = {}
    for key in ("method", "equation", "geometry", "k", "eta", "M", "interpolant", "tol", "max_iter", "restart",
                "n_anchors", "seed", "near_half_side", "output_csv", "output_json"):
        if opts.get(key) is not None:
            over[key] = opts[key]
    if opts.get("timings"):
        over["timings"] = True
    if opts.get("resolutions"):
        over["resolutions"] = _resolutions(opts["resolutions"])
    if opts.get("mesh"):
        over["geometry"] = "mesh"
        over["resolutions"] = list(opts["mesh"])
    if opts.get("incident") or opts.get("direction"):
        inc = base.incident
        kind = opts.get("incident") or inc.kind
        direction = _floats(opts["direction"], "--direction", 3) if opts.get("direction") else inc.direction
        over["incident"] = {"kind": kind, "direction": direction,
                            "sources": inc.sources if kind == inc.kind else None}
    return base.with_overrides(**over)


def common_options(fn):
    opts = [
        click.option("--config", type=click.Path(exists=True, dir_okay=False), help="JSON experiment config."),
        click.option("--method", type=click.Choice(["nystrom", "bem", "multiscatter"])),
        click.option("--equation", type=click.Choice(["bw", "bm", "bm-direct", "bm-regularized"])),
        click.option("--geometry", type=click.Choice(["sphere", "ellipsoid", "bean", "cube", "hemisphere", "composite"])),
        click.option("--mesh", multiple=True, type=click.Path(exists=True, dir_okay=False),
                     help="Mesh file (.off or .msh); repeat for a refinement sequence."),
        click.option("-k", "--k", "k", type=float, help="Wavenumber."),
        click.option("--eta", type=float, help="Coupling parameter (defaults to k)."),
        click.option("-M", "--order", "M", type=int, help="Interpolation order."),
        click.option("--interpolant", type=click.Choice(["analytic", "algebraic"])),
        click.option("--resolutions", help="Comma list: N per patch side, subdivisions or mesh sizes."),
        click.option("--incident", type=click.Choice(["interior-sources", "planewave"])),
        click.option("--direction", help="Planewave direction x,y,z (unit)."),
        click.option("--tol", type=float, help="GMRES relative tolerance."),
        click.option("--max-iter", "max_iter", type=int),
        click.option("--restart", type=int),
        click.option("--near-half-side", "near_half_side", type=float, help="Half side of the near-field cube grid."),
        click.option("--n-anchors", "n_anchors", type=int),
        click.option("--seed", type=int),
        click.option("--timings", is_flag=True, help="Include wall times (makes output non-reproducible)."),
        click.option("--output-csv", "output_csv", type=click.Path(dir_okay=False)),
        click.option("--output-json", "output_json", type=click.Path(dir_okay=False)),
    ]
    for o in reversed(opts):
        fn = o(fn)
    return fn


def _run(opts: dict, body) -> None:
    try:
        cfg = _build_config(opts)
    except (ConfigError, OSError) as e:
        _emit_error(e, EXIT_CONFIG)
    try:
        body(cfg)
    except ConfigError as e:
        _emit_error(e, EXIT_CONFIG)
    except Exception as e:  # noqa: BLE001  surfaced as machine-readable error
        log.debug("run failed", exc_info=True)
        _emit_error(e, EXIT_RUNTIME)


@click.group()
@click.option("-v", "--verbose", count=True, help="Increase log verbosity.")
def main(verbose: int) -> None:
    """Planewave density interpolation solvers for 3D Helmholtz scattering."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@main.command("interp-check")
@common_options
def interp_check(**opts):
    """Residuals of the interpolation conditions at random surface anchors."""

    def body(cfg):
        text, summary = run_interp_check(cfg)
        _write(text, cfg.output_csv)
        if cfg.output_json:
            Path(cfg.output_json).write_text(json.dumps({"config": cfg.to_dict(), "summary": summary},
                                                        sort_keys=True, indent=2))
        else:
            click.echo(json.dumps(summary, sort_keys=True), err=True)

    _run(opts, body)


@main.command()
@common_options
def solve(**opts):
    """Solve at the finest configured resolution and report errors as JSON."""

    def body(cfg):
        report = run_solve(cfg)
        text = json.dumps(report, sort_keys=True, indent=2) + "\n"
        _write(text, cfg.output_json)
        if report["result"]["status"] != "ok":
            raise RuntimeError(report["result"]["status"])

    _run(opts, body)


@main.command()
@common_options
def convergence(**opts):
    """Error table with orders of convergence over the resolution list (CSV)."""

    def body(cfg):
        if len(cfg.resolutions) < 1:
            raise ConfigError("convergence needs at least one resolution")
        rows = run_convergence(cfg)
        _write(rows_to_csv(cfg, rows), cfg.output_csv)
        if cfg.output_json:
            Path(cfg.output_json).write_text(json.dumps({"config": cfg.to_dict(), "rows": [r.__dict__ for r in rows]},
                                                        sort_keys=True, indent=2, default=str))

    _run(opts, body)


@main.command()
@common_options
@click.option("--targets", "targets_json", help="JSON target spec, e.g. '{\"kind\": \"plane\", \"n\": [11, 11]}'.")
def nearfield(targets_json=None, **opts):
    """Scattered and total field at plane, cube or listed points (CSV)."""
    if targets_json:
        try:
            targets = json.loads(targets_json)
        except json.JSONDecodeError as e:
            _emit_error(ConfigError(f"invalid --targets JSON: {e}"), EXIT_CONFIG)
    else:
        targets = None

    def body(cfg):
        if targets is not None:
            cfg = cfg.with_overrides(targets=targets)
        _write(run_nearfield(cfg), cfg.output_csv)

    _run(opts, body)


if __name__ == "__main__":
    main()
