"""hypbound command line.

Usage:
    python cli.py fixed-points --a 2 --b 0.3
    python cli.py astar --b 0.01 --bracket 1.7 2.5 --tol 1e-8
    python cli.py escape-check --region V1 --grid 100
    python cli.py scan --b 0.05 --a-min 1.9 --a-max 2.2 --points 7 --observables gap,crossings

Every command writes <command>_report.json plus its CSV artifacts into --out
(default HYPBOUND_OUTPUT_DIR). Exit status: 0 ok, 2 a check failed, 1 usage or
config error.
"""
import functools
import json
import os
import sys
import tempfile

import click

from commands import run_command
from errors import AnalysisError, ConfigError
from extensions import VERSION, configure_logging
from forms import ESCAPE_REGIONS, build_run_config

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CHECKS_FAILED = 2


class AnalysisFailed(click.ClickException):
    exit_code = EXIT_CHECKS_FAILED


def write_atomic(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def dump_report(report):
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_outputs(out_dir, command, report, artifacts):
    files = []
    for name, text in sorted(artifacts.items()):
        path = os.path.join(out_dir, name)
        write_atomic(path, text)
        files.append(path)
    path = os.path.join(out_dir, f"{command.replace('-', '_')}_report.json")
    write_atomic(path, dump_report(report))
    files.append(path)
    return files


def load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, ValueError) as exc:
        raise click.ClickException(f"Cannot read config {path}: {exc}")


def execute(command, config_path, overrides):
    raw = load_config(config_path)
    try:
        cfg = build_run_config(command, raw, overrides)
    except ConfigError as exc:
        raise click.ClickException(f"{exc.message}: {json.dumps(exc.details, sort_keys=True)}")
    try:
        report, passed, artifacts = run_command(cfg)
    except AnalysisError as exc:
        raise AnalysisFailed(f"{type(exc).__name__}: {exc.message} {json.dumps(exc.details, sort_keys=True, default=str)}")
    files = write_outputs(cfg.output_dir, command, report, artifacts)
    for path in files:
        click.echo(path)
    if not passed:
        click.echo(f"{command}: checks failed", err=True)
        click.get_current_context().exit(EXIT_CHECKS_FAILED)


def common_options(fn):
    """Family, constants and run options shared by every command."""
    options = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False), help="JSON config file."),
        click.option("--out", "output_dir", help="Output directory (default HYPBOUND_OUTPUT_DIR or ./out)."),
        click.option("--seed", type=int, help="RNG seed."),
        click.option("--a", type=float, help="Family parameter a."),
        click.option("--b", type=float, help="Family parameter b (0 < |b| < 1)."),
        click.option("--eta-bound", type=float, help="Declared C2 bound of the perturbation."),
        click.option("--perturbation", type=click.Choice(["zero", "bump"]), help="Perturbation name."),
        click.option("--perturbation-epsilon", type=float, help="Bump amplitude."),
        click.option("--perturbation-scale", type=float, help="Bump scale factor."),
        click.option("--delta", type=float, help="Radius of the neighbourhood of q."),
        click.option("--alpha", type=float, help="Admissible slope and curvature bound."),
        click.option("--epsilon", type=float, help="Half width of the critical strip."),
        click.option("--k0", type=int, help="Minimal return order."),
        click.option("--lambda-hat", type=float, help="Target expansion rate."),
        click.option("--max-spacing", type=float, help="Manifold vertex spacing."),
        click.option("--max-turn", type=float, help="Manifold turning angle."),
        click.option("--blowup", type=float, help="Escape threshold for orbits."),
    ]

    @functools.wraps(fn)
    def wrapper(config_path, **kwargs):
        return fn(config_path, **kwargs)

    for option in reversed(options):
        wrapper = option(wrapper)
    return wrapper


@click.group()
@click.version_option(VERSION, prog_name="hypbound")
def cli():
    """Analyses of Henon-like maps near the first tangency."""


@cli.command("fixed-points")
@common_options
def fixed_points_cmd(config_path, **overrides):
    """Saddle fixed points P and Q with eigen-data."""
    execute("fixed-points", config_path, overrides)


@cli.command("manifold")
@common_options
@click.option("--kind", type=click.Choice(["unstable", "stable"]))
@click.option("--point", type=click.Choice(["p", "q"]))
@click.option("--arclength", type=float, help="Arclength of unstable growth.")
@click.option("--generations", type=int, help="Backward generations of stable growth.")
def manifold_cmd(config_path, **overrides):
    """Grow W^u or W^s of a fixed point and write the curve CSV."""
    execute("manifold", config_path, overrides)


@cli.command("astar")
@common_options
@click.option("--bracket", type=float, nargs=2, help="Parameter bracket a_lo a_hi.")
@click.option("--tol", type=float)
@click.option("--scan-points", type=int)
def astar_cmd(config_path, bracket=None, **overrides):
    """First-tangency parameter a* by bisection on the signed gap."""
    if bracket:
        overrides["bracket_lo"], overrides["bracket_hi"] = bracket
    execute("astar", config_path, overrides)


@cli.command("escape-check")
@common_options
@click.option("--region", type=click.Choice(ESCAPE_REGIONS))
@click.option("--grid", type=int)
@click.option("--max-steps", type=int)
def escape_check_cmd(config_path, **overrides):
    """Sample a region V1..V6 and verify every point escapes [-10, 10]^2."""
    execute("escape-check", config_path, overrides)


@cli.command("certify-cones")
@common_options
@click.option("--samples", type=int)
@click.option("--segments", type=int)
@click.option("--max-len", type=int)
@click.option("--c-eps-target", type=float)
def certify_cones_cmd(config_path, **overrides):
    """Cone invariance and expansion outside the critical strip."""
    execute("certify-cones", config_path, overrides)


@cli.command("critical-points")
@common_options
@click.option("--k-min", type=int)
@click.option("--k-max", type=int)
@click.option("--curve-x0", type=float)
@click.option("--curve-y0", type=float)
@click.option("--half-length", type=float)
def critical_points_cmd(config_path, **overrides):
    """Critical points of orders k_min..k_max on a horizontal curve."""
    execute("critical-points", config_path, overrides)


@cli.command("foliation")
@common_options
@click.option("--seed-x", type=float)
@click.option("--seed-y", type=float)
@click.option("--k-max", type=int)
@click.option("--arclength", type=float)
def foliation_cmd(config_path, **overrides):
    """Finite-order stable leaves through a seed and their convergence."""
    execute("foliation", config_path, overrides)


@cli.command("lyapunov")
@common_options
@click.option("--x", type=float)
@click.option("--y", type=float)
@click.option("--n", type=int)
@click.option("--transient", type=int)
def lyapunov_cmd(config_path, **overrides):
    """Lyapunov exponents of an orbit, or of P and Q when no point is given."""
    execute("lyapunov", config_path, overrides)


@cli.command("periodic-orbits")
@common_options
@click.option("--max-period", type=int)
def periodic_orbits_cmd(config_path, **overrides):
    """Periodic orbits up to a period with their exponents."""
    execute("periodic-orbits", config_path, overrides)


@cli.command("splitting")
@common_options
@click.option("--samples", type=int)
@click.option("--k-split", type=int)
@click.option("--n-steps", type=int)
def splitting_cmd(config_path, **overrides):
    """Angles between E^u and E^s on an approximation of the non-wandering set."""
    execute("splitting", config_path, overrides)


@cli.command("scan")
@common_options
@click.option("--a-min", type=float)
@click.option("--a-max", type=float)
@click.option("--points", type=int)
@click.option("--observables", help="Comma separated: gap, crossings, min_splitting_angle, lyapunov_min.")
def scan_cmd(config_path, **overrides):
    """Observables over a grid of a values."""
    execute("scan", config_path, overrides)


@cli.command("onedim")
@common_options
@click.option("--max-period", type=int)
@click.option("--bump-scale", type=float)
@click.option("--bracket", type=float, nargs=2)
@click.option("--tol", type=float)
def onedim_cmd(config_path, bracket=None, **overrides):
    """One-dimensional quadratic family: a*, periodic orbits and expansion."""
    if bracket:
        overrides["bracket_lo"], overrides["bracket_hi"] = bracket
    execute("onedim", config_path, overrides)


def main(argv=None):
    configure_logging()
    try:
        code = cli.main(args=argv, prog_name="hypbound", standalone_mode=False)
    except click.exceptions.Abort:
        return EXIT_USAGE
    except AnalysisFailed as exc:
        exc.show()
        return EXIT_CHECKS_FAILED
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    return code or EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
