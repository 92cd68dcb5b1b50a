"""Command line interface: ``corrugate <subcommand>``."""

from __future__ import annotations

import sys

import click

from . import pipeline as pl
from .errors import ConfigError, CorrugateError


def _finish(result: pl.TaskResult, echo: bool = True) -> None:
    if echo and result.report:
        click.echo(result.report, nl=False)
    sys.exit(result.exit_code)


def _guard(fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(pl.EXIT_USAGE)
    except (CorrugateError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(pl.EXIT_FAIL)


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(package_name="artifact")
def main():
    """Corrugation Processes, the desingularized conoid and Nash-Kuiper desk runs."""


@main.command()
@click.option("--alpha", default="alpha0", show_default=True, help="Amplitude, a number or 'alpha0'.")
@click.option("--samples", type=click.IntRange(2), default=257, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def pattern(alpha, samples, out):
    """Tabulate the loop pattern and its periodic primitives."""
    _finish(_guard(pl.pattern_task, out, alpha, samples))


@main.command()
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--pi", "pi_spec", default="axis:0", show_default=True, help="'axis:j' or comma separated coefficients.")
@click.option("--pattern-alpha", "alpha", default="alpha0", show_default=True)
@click.option("--n", "N", type=float, required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def cp(input_path, pi_spec, alpha, N, out):
    """Apply one Corrugation Process to a grid CSV."""
    _finish(_guard(pl.cp_task, input_path, pi_spec, alpha, N, out))


@main.command()
@click.option("--n", "N", type=float, default=5.5, show_default=True)
@click.option("--res", type=click.IntRange(2), default=513, show_default=True)
@click.option("--check-res", type=click.IntRange(3), default=513, show_default=True)
@click.option("--theta", type=click.Choice(["caption", "theta_max"]), default="caption", show_default=True)
@click.option("--alpha", type=click.Choice(["caption", "alpha0", "zero"]), default="caption", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default="conoid.obj", show_default=True)
def conoid(N, res, check_res, theta, alpha, out):
    """Mesh and immersion report of the corrugated Plucker conoid."""
    _finish(_guard(pl.conoid_task, out, N, res, check_res, theta, alpha))


@main.command()
@click.option("--n", "N", type=float, default=5.5, show_default=True)
@click.option("--res", type=click.IntRange(2), default=1025, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default="rp2.obj", show_default=True)
def rp2(N, res, out):
    """Mesh of the sphere-capped extension and its boundary check."""
    _finish(_guard(pl.rp2_task, out, N, res))


@main.command()
@click.option("--stages", type=click.IntRange(0), default=3, show_default=True)
@click.option("--res", type=click.IntRange(5), default=None, help="Grid resolution (default depends on the map).")
@click.option("--out-prefix", type=click.Path(file_okay=False), default="run", show_default=True)
@click.option("--map", "demo", type=click.Choice(sorted(pl.DEMO_MAPS)), default="torus", show_default=True)
@click.option("--target", type=click.Choice(["euclidean", "totally_real"]), default=None)
@click.option("--strict/--no-strict", default=True, show_default=True,
              help="Stop when no N up to the cap meets the step budget.")
@click.option("--n-start", type=click.IntRange(1), default=8, show_default=True)
@click.option("--n-cap", type=click.IntRange(1, 1 << 20), default=1 << 20, show_default=True)
def torus(stages, res, out_prefix, demo, target, strict, n_start, n_cap):
    """Nash-Kuiper staging toward the flat metric."""
    _finish(_guard(pl.torus_task, out_prefix, stages, res, demo, target, strict, n_start, n_cap))


@main.command()
@click.option("--relation", type=click.Choice(["immersion", "totally-real", "isometric"]), default=None,
              help="Sweep slice membership instead of the CP property report.")
@click.option("--map", "demo", type=click.Choice(sorted(pl.VERIFY_MAPS)), default="torus", show_default=True)
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--pi", "pi_spec", default="axis:1", show_default=True)
@click.option("--pattern-alpha", "alpha", default="alpha0", show_default=True)
@click.option("--n", "N", type=float, default=16.0, show_default=True)
@click.option("--res", type=click.IntRange(3), default=None, help="Sample grid (65 for relations, 257 for CP).")
def verify(relation, demo, input_path, pi_spec, alpha, N, res):
    """CP property report (property,measured,bound,pass) or relation membership counts."""
    if relation is None:
        _finish(_guard(pl.cp_report_task, N, res or 257, input_path, pi_spec, alpha))
    _finish(_guard(pl.relation_task, relation, demo, res or 65, input_path))


@main.command()
@click.option("--run", "run_dir", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(dir_okay=False), default="maslov.csv", show_default=True)
def maslov(run_dir, out):
    """Maslov angle series of a totally real run."""
    _finish(_guard(pl.maslov_task, run_dir, out))


@main.command()
@click.option("--run", "run_dir", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.option("--stride", type=click.IntRange(1), default=3, show_default=True,
              help="Node stride; odd strides avoid sampling only integer phases.")
def bases(run_dir, out, stride):
    """Rotation-form residuals of the corrugation matrices of a run."""
    _finish(_guard(pl.bases_task, run_dir, out, stride))


@main.command()
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--map", "demo", type=click.Choice(["torus", "conoid", "conoid-corrugated"]), default="conoid-corrugated",
              show_default=True)
@click.option("--res", type=click.IntRange(2), default=257, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def export(input_path, demo, res, out):
    """Write an OBJ mesh of a grid CSV or a built-in surface."""
    _finish(_guard(pl.export_task, out, input_path, demo, res))


@main.command()
@click.argument("config", type=click.Path(exists=True, dir_okay=False))
def run(config):
    """Run the task described by a config file and write a manifest."""
    rep = _guard(pl.run_pipeline, config)
    if rep.report:
        click.echo(rep.report, nl=False)
    click.echo(f"manifest,{rep.manifest}")
    sys.exit(rep.exit_code)


if __name__ == "__main__":
    main()
