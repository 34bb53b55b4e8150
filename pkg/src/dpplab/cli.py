"""Command line entry points.

    lab regime-sweep --config FILE     (alpha, delta) grid: CGF errors, KS, shares
    lab cgf --config FILE              CGF convergence tables over n
    lab mc --config FILE               Monte Carlo ensembles + summaries
    lab sine --config FILE             Fredholm route over the L grid
    lab plots DIR                      emit plot scripts and render figures

Every runner exits 0 when all configured gates pass, 1 when a gate fails,
and 2 when a grid point errored (details in errors.csv).  LAB_THREADS
caps parallelism.  ``--print-config`` on any runner dumps the fully
explicit TOML config (defaults filled in) and exits.
"""

from __future__ import annotations

import sys

import click

from . import experiments
from .plots import emit_plots


@click.group()
def main():
    """Thinned determinantal process laboratory."""


def _run(kind, config_path, print_config, runner):
    if print_config:
        if config_path:
            cfg = experiments.load_config(config_path)
        else:
            cfg = experiments.default_config(kind)
        click.echo(experiments.dump_config(cfg), nl=False)
        sys.exit(0)
    if not config_path:
        raise click.UsageError("--config is required (or use --print-config)")
    cfg = experiments.load_config(config_path)
    cfg.kind = kind
    result = runner(cfg)
    click.echo(f"wrote {result.csv_path}")
    for point, message in result.errors:
        click.echo(f"error at {point}: {message}", err=True)
    if not result.gates_passed:
        click.echo("gates: FAIL", err=True)
    else:
        click.echo("gates: pass")
    sys.exit(result.exit_code)


def _config_options(fn):
    fn = click.option(
        "--config",
        "config_path",
        type=click.Path(exists=True, dir_okay=False),
        default=None,
        help="TOML experiment config.",
    )(fn)
    fn = click.option(
        "--print-config",
        is_flag=True,
        help="Dump the fully explicit config and exit.",
    )(fn)
    return fn


@main.command("regime-sweep")
@_config_options
def regime_sweep(config_path, print_config):
    """Sweep the (alpha, delta) diagram: CGF errors, KS distances, shares."""
    _run("regime-sweep", config_path, print_config, experiments.run_regime_sweep)


@main.command("cgf")
@_config_options
def cgf(config_path, print_config):
    """CGF convergence study over the n grid."""
    _run("cgf", config_path, print_config, experiments.run_cgf_convergence)


@main.command("mc")
@_config_options
def mc(config_path, print_config):
    """Monte Carlo ensembles with cumulant and KS summaries."""
    _run("mc", config_path, print_config, experiments.run_mc)


@main.command("sine")
@_config_options
def sine(config_path, print_config):
    """Fredholm-determinant convergence study over the L grid."""
    _run("sine", config_path, print_config, experiments.run_sine)


@main.command("plots")
@click.argument("csv_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--render/--no-render", default=True, help="Run the scripts too.")
def plots(csv_dir, render):
    """Emit plot scripts for experiment CSVs and render the figures."""
    scripts = emit_plots(csv_dir, render=render)
    for script in scripts:
        click.echo(f"wrote {script}")
    sys.exit(0)


if __name__ == "__main__":
    main()
