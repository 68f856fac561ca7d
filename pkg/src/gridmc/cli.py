"""Command-line interface: run, compare and validate experiments."""

import sys
from pathlib import Path

import click

from .config import ConfigError, load_config
from .experiments import build_model_stack, run_experiment
from .report import compare_runs, load_record

DATA_DIR_ENVVAR = "GRIDMC_DATA_DIR"


@click.group()
def main():
    """Adequacy-assessment Monte Carlo experiments."""


@main.command()
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
              help="Output directory (default: config output_dir).")
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--workers", type=int, default=None,
              help="Parallel evaluation workers (1 = deterministic reference).")
@click.option("--quiet", is_flag=True, help="Suppress per-run progress lines.")
def run(config_path, out_dir, seed, workers, quiet):
    """Run the experiment described by CONFIG_PATH."""
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        raise click.ClickException(f"invalid config: {exc}")
    if seed is not None:
        cfg.seed = seed
    if workers is not None:
        cfg.workers = workers

    def progress(run_idx, total, row):
        if not quiet:
            counts = ", ".join(f"L{k}:{v}" for k, v in row["counts"].items())
            click.echo(f"run {run_idx}/{total}  samples {counts}")

    record = run_experiment(cfg, out_dir=out_dir, progress=progress)
    target = out_dir if out_dir is not None else cfg.output_dir
    if not quiet:
        click.echo((Path(target) / "report.txt").read_text())
    click.echo(f"results written to {target}/results.json")


@main.command()
@click.argument("records", nargs=-1, required=True,
                type=click.Path(exists=True, dir_okay=False))
@click.option("--baseline", default=None,
              help="Record label used as the speedup baseline (default: first).")
def compare(records, baseline):
    """Tabulate estimates, speeds and speedups across result records."""
    try:
        table = compare_runs([load_record(p) for p in records],
                             baseline_label=baseline)
    except ValueError as exc:
        raise click.ClickException(str(exc))
    click.echo(table, nl=False)


@main.command()
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
def validate(config_path):
    """Check a config file and its referenced data without running."""
    try:
        cfg = load_config(config_path)
        model, files = build_model_stack(cfg)
    except (ConfigError, ValueError, OSError) as exc:
        click.echo(f"INVALID: {exc}", err=True)
        sys.exit(1)
    click.echo(f"config ok: {cfg.label}")
    click.echo(f"stack levels: {list(model.stack.level_names)} "
               f"(analytic level 0: {model.use_analytic_level0})")
    for p in files:
        click.echo(f"data: {p}")


if __name__ == "__main__":
    main()
