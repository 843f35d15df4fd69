"""Click-based CLI entry point."""

from __future__ import annotations

import fnmatch
import json
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import click

from . import __version__
from .config import Settings, get_all_config_sources, load_settings
from .convergence import ConvergenceStudy
from .gark_expansion import check_gark_order, expand, fast_method
from .integrator import InnerMode
from .order_conditions import ConditionReport, all_passed, default_tolerance, verify_method
from .problems import PROBLEMS, make_problem, parse_params
from .stability import RegionScan, ScanGrid, ScanMode, scan_region, write_scan_csv, write_scan_files
from .tableaux import (
    MriGarkMethod,
    UnknownMethodError,
    available_methods,
    builtin,
    load_method_file,
    method_to_dict,
)

EXIT_FAILED = 1
EXIT_USAGE = 2

# Fast tableau pairs used by the tree oracle, by target order
ORACLE_FAST_PAIRS = {1: ("kutta3", "rk4"), 2: ("kutta3", "rk4"), 3: ("kutta3", "rk4"),
                     4: ("rk4", "rk38")}


@dataclass
class CliState:
    settings: Settings
    fmt: str | None
    out: Path | None
    seed: int | None
    threads: int


def _fail(message: str, code: int) -> None:
    click.echo(f"Error: {message}", err=True)
    sys.exit(code)


def _resolve_method(name: str | None, method_file: Path | None) -> MriGarkMethod:
    """Load a method by registry name or from a JSON file, exiting 2 on error."""
    if method_file is not None:
        try:
            return load_method_file(method_file)
        except (OSError, ValueError) as e:
            _fail(str(e), EXIT_USAGE)
    if name is None:
        _fail("one of --method or --method-file is required", EXIT_USAGE)
    try:
        return builtin(name)
    except UnknownMethodError as e:
        _fail(str(e), EXIT_USAGE)
    raise AssertionError("unreachable")


def _default_out(state: CliState, stem: str, suffix: str) -> Path | None:
    if state.out is not None:
        return state.out
    if state.settings.out_dir:
        return Path(state.settings.out_dir) / f"{stem}{suffix}"
    return None


def _method_options(func: Any) -> Any:
    func = click.option("--method-file", type=click.Path(path_type=Path),
                        help="Load the method from a JSON file")(func)
    func = click.option("-m", "--method", "method_name", help="Registry method name")(func)
    return func


@click.group()
@click.version_option(version=__version__)
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default=None,
              help="Output format")
@click.option("--out", type=click.Path(path_type=Path), default=None,
              help="Write results to this file instead of stdout")
@click.option("--seed", type=int, default=None, help="Reserved for randomised sampling")
@click.option("--threads", type=int, default=None, help="Worker threads for convergence levels")
@click.option("-v", "--verbose", is_flag=True, help="Log solver details to stderr")
@click.pass_context
def main(ctx: click.Context, fmt: str | None, out: Path | None, seed: int | None,
         threads: int | None, verbose: bool) -> None:
    """Multirate infinitesimal GARK time integrators.

    Lists and validates the built-in methods, runs convergence studies on
    benchmark problems, and scans linear stability regions.
    """
    if verbose:
        logging.basicConfig(level=logging.DEBUG, format="%(name)s: %(message)s")
    try:
        settings = load_settings()
    except ValueError as e:
        _fail(str(e), EXIT_USAGE)
    if threads is not None and threads < 1:
        _fail(f"--threads must be at least 1, got {threads}", EXIT_USAGE)
    ctx.obj = CliState(
        settings=settings,
        fmt=fmt,
        out=out,
        seed=seed,
        threads=threads if threads is not None else settings.threads,
    )


@main.command("list")
@click.option("-f", "--filter", "pattern", default=None, help="Only methods matching pattern")
@click.pass_obj
def list_cmd(state: CliState, pattern: str | None) -> None:
    """List the built-in methods."""
    names = available_methods()
    if pattern:
        names = [n for n in names if fnmatch.fnmatch(n, pattern)]
    methods = [builtin(n) for n in names]

    if state.fmt == "json":
        click.echo(json.dumps([
            {
                "name": m.name,
                "order": m.order,
                "embedded_order": m.embedded_order,
                "kind": m.kind.value,
                "stages": m.stages,
            }
            for m in methods
        ], indent=2))
        return
    if state.fmt == "csv":
        click.echo("name,order,embedded_order,kind,stages")
        for m in methods:
            click.echo(f"{m.name},{m.order},{m.embedded_order},{m.kind.value},{m.stages}")
        return

    if not methods:
        click.echo("No methods match.")
        return
    name_width = max(max(len(m.name) for m in methods), 6)
    click.echo(f"{'METHOD':<{name_width}}  ORDER  EMBEDDED  STAGES  KIND")
    click.echo("-" * (name_width + 45))
    for m in methods:
        click.echo(
            f"{m.name:<{name_width}}  {m.order:<5}  {m.embedded_order:<8}  "
            f"{m.stages:<6}  {m.kind.value}"
        )


@main.command()
@click.argument("name")
def show(name: str) -> None:
    """Print a method in the registry JSON schema."""
    try:
        method = builtin(name)
    except UnknownMethodError as e:
        _fail(str(e), EXIT_USAGE)
    click.echo(json.dumps(method_to_dict(method), indent=2))


def _oracle_reports(method: MriGarkMethod, order: int, exact: bool) -> list[ConditionReport]:
    reports = []
    tol = default_tolerance(method) if exact else 1e-12
    for fast_name in ORACLE_FAST_PAIRS[order]:
        tab = expand(method, fast_method(fast_name))
        for r in check_gark_order(tab, order, tol=tol, exact=exact):
            r.condition_id = f"oracle.{fast_name}.{r.condition_id}"
            reports.append(r)
    return reports


@main.command()
@_method_options
@click.option("-p", "--order", type=int, default=None, help="Order to certify (default: declared)")
@click.option("--tol", type=float, default=None, help="Tolerance (default: exact or 1e-20)")
@click.option("--oracle", is_flag=True, help="Also check the expanded GARK tableau on colored trees")
@click.option("--exact", is_flag=True, help="Run the tree oracle in rational arithmetic")
@click.pass_obj
def validate(state: CliState, method_name: str | None, method_file: Path | None,
             order: int | None, tol: float | None, oracle: bool, exact: bool) -> None:
    """Check order conditions; exit 0 only if all pass."""
    method = _resolve_method(method_name, method_file)
    order = method.order if order is None else order
    if not 1 <= order <= 4:
        _fail(f"--order must lie in 1..4, got {order}", EXIT_USAGE)

    reports = verify_method(method, order, tol)
    if oracle:
        reports += _oracle_reports(method, order, exact)

    if state.fmt == "csv":
        click.echo("id,lhs,rhs,residual,pass")
        for r in reports:
            click.echo(f"{r.condition_id},{r.lhs:.17g},{r.rhs:.17g},{r.residual:.17g},"
                       f"{str(r.passed).lower()}")
    else:
        click.echo(json.dumps([r.to_dict() for r in reports], indent=2))

    if not all_passed(reports):
        failed = [r.condition_id for r in reports if not r.passed]
        click.echo(f"{method.name}: {len(failed)} of {len(reports)} checks failed: "
                   f"{', '.join(failed[:5])}", err=True)
        sys.exit(EXIT_FAILED)


@main.command()
@_method_options
@click.option("--problem", type=click.Choice(sorted(PROBLEMS)), default="kpr", help="Benchmark problem")
@click.option("--param", "params", multiple=True, help="Problem parameter override key=value")
@click.option("--h0", type=float, default=None,
              help="Coarsest step (default: interval / 16, capped by the problem)")
@click.option("--levels", type=int, default=6, help="Number of step halvings")
@click.option("--inner-mode", type=click.Choice(["adaptive", "fixed"]), default="adaptive")
@click.option("--inner-tol", type=float, default=None, help="Inner rel/abs tolerance")
@click.option("--substeps", type=int, default=1, help="Fixed inner substeps per stage")
@click.option("--inner-order", type=int, default=4, help="Fixed inner order (1-4)")
@click.option("--trajectory", type=click.Path(path_type=Path), default=None,
              help="Write the finest-level trajectory CSV here")
@click.pass_obj
def converge(state: CliState, method_name: str | None, method_file: Path | None, problem: str,
             params: tuple[str, ...], h0: float | None, levels: int, inner_mode: str,
             inner_tol: float | None, substeps: int, inner_order: int,
             trajectory: Path | None) -> None:
    """Run a convergence study and report the observed order."""
    method = _resolve_method(method_name, method_file)
    settings = state.settings
    try:
        prob = make_problem(problem, parse_params(params))
        inner = settings.inner(InnerMode(inner_mode), inner_tol, substeps, inner_order)
        study = ConvergenceStudy(
            method, prob, inner, settings.newton(),
            threads=state.threads,
            reference_tol=settings.reference_tol,
            output=sys.stderr,
        )
        report = study.run(h0, levels)
    except ValueError as e:
        _fail(str(e), EXIT_USAGE)

    out = _default_out(state, f"converge-{method.name}-{prob.name}", ".csv")
    if out is not None:
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w") as f:
            report.write_csv(f)
        out.with_suffix(".json").write_text(json.dumps(report.to_dict(), indent=2) + "\n")
        click.echo(f"Wrote {out} and {out.with_suffix('.json')}", err=True)
    elif state.fmt == "csv":
        report.write_csv(sys.stdout)
    else:
        click.echo(json.dumps(report.to_dict(), indent=2))

    if trajectory is not None and study.finest_trajectory is not None:
        trajectory.parent.mkdir(parents=True, exist_ok=True)
        with open(trajectory, "w") as f:
            study.finest_trajectory.write_csv(f)
        with open(trajectory.with_suffix(".json"), "w") as f:
            study.finest_trajectory.write_stats(f)

    if report.failed:
        failed = next(r for r in report.rows if not r.success)
        click.echo(f"Error: integration failed at H = {failed.H:g}: {failed.error_message}",
                   err=True)
        sys.exit(EXIT_FAILED)


def _parse_rho(value: str) -> float:
    try:
        rho = float(value)
    except ValueError:
        raise click.BadParameter(f"expected a number or 'inf', got {value!r}") from None
    if math.isnan(rho) or rho < 0:
        raise click.BadParameter(f"rho must be nonnegative, got {value!r}")
    return rho


@main.command()
@_method_options
@click.option("--mode", type=click.Choice(["scalar", "matrix"]), default="scalar")
@click.option("--rho", default="inf", help="Wedge radius (number or 'inf')")
@click.option("--alpha", type=float, default=10.0, help="Wedge half-angle in degrees")
@click.option("--xi", type=float, default=0.0, help="Coupling mix (matrix mode)")
@click.option("--re-min", type=float, default=-6.0)
@click.option("--re-max", type=float, default=1.0)
@click.option("--im-min", type=float, default=-4.0)
@click.option("--im-max", type=float, default=4.0)
@click.option("--nre", type=int, default=141, help="Grid points along Re z_s")
@click.option("--nim", type=int, default=161, help="Grid points along Im z_s")
@click.option("--radii", type=int, default=40, help="Log-spaced wedge radii")
@click.pass_obj
def stability(state: CliState, method_name: str | None, method_file: Path | None, mode: str,
              rho: str, alpha: float, xi: float, re_min: float, re_max: float,
              im_min: float, im_max: float, nre: int, nim: int, radii: int) -> None:
    """Scan a slow stability region over a wedge of fast arguments."""
    method = _resolve_method(method_name, method_file)
    try:
        scan = RegionScan(
            mode=ScanMode(mode),
            rho=_parse_rho(rho),
            alpha_deg=alpha,
            xi=xi,
            grid=ScanGrid(re_min, re_max, im_min, im_max, nre, nim),
            n_radii=radii,
        )
        scan = scan_region(method, scan)
    except (ValueError, click.BadParameter) as e:
        _fail(str(e), EXIT_USAGE)

    out = _default_out(state, f"stability-{method.name}-{mode}", ".csv")
    if out is not None:
        csv_path, sidecar = write_scan_files(scan, method.name, out)
        click.echo(f"Wrote {csv_path} and {sidecar}", err=True)
    elif state.fmt == "json":
        data = scan.metadata(method.name)
        data["members"] = int(scan.membership.sum())
        data["points"] = int(scan.membership.size)
        click.echo(json.dumps(data, indent=2))
    else:
        write_scan_csv(scan, sys.stdout)


@main.command("config")
@click.option("-j", "--json", "json_output", is_flag=True, help="Machine-parseable JSON output")
@click.pass_obj
def config_cmd(state: CliState, json_output: bool) -> None:
    """Show effective settings and all config sources."""
    settings = state.settings
    values = {name: getattr(settings, name) for name in settings.sources}
    if json_output:
        click.echo(json.dumps({"settings": values, "sources": settings.sources}, indent=2))
        return

    click.echo("Settings:")
    for name, value in values.items():
        click.echo(f"  {name:<16}{value!s:<14}({settings.sources[name]})")
    click.echo("")
    click.echo("Configuration sources (highest priority first):")
    for i, source in enumerate(get_all_config_sources(), 1):
        marker = "  [active]" if source.status == "active" else ""
        click.echo(f"  {i}. {source.name}: {source.status}{marker}")
        if source.variables:
            for key, value in source.variables.items():
                click.echo(f"     {key}={value}")
