"""Experiment orchestration: config in, result record and report files out."""

from pathlib import Path

from . import __version__
from .composite import CompositeStack, CompositeSystem
from .config import ExperimentConfig
from .dataio import (
    data_hashes,
    load_fleet,
    load_network,
    load_portfolio,
    load_trace_library,
    resolve_data_dir,
)
from .report import build_record, write_record
from .runner import ModelStack, run_controller
from .storage import StorageStack

__all__ = ["build_model_stack", "run_experiment"]


def _composite_stack(cfg: ExperimentConfig):
    data_dir = resolve_data_dir(cfg.data.get("dir"))
    network_path = Path(cfg.data.get("network", data_dir / "rts" / "network.yaml"))
    network = load_network(network_path, rating_scale=cfg.rating_scale)
    stack = CompositeStack(CompositeSystem(network), tuple(cfg.stack))
    files = [network_path, network_path.parent / "demand.csv"]
    return stack, files


def _storage_stack(cfg: ExperimentConfig):
    data_dir = resolve_data_dir(cfg.data.get("dir"))
    gb = data_dir / "gb"
    paths = {
        "portfolio": Path(cfg.data.get("portfolio", gb / "portfolio.csv")),
        "demand_years": Path(cfg.data.get("demand_years", gb / "demand_years.csv")),
        "wind_years": Path(cfg.data.get("wind_years", gb / "wind_years.csv")),
        "fleet": Path(cfg.data.get("fleet", gb / "fleet.csv")),
    }
    stack = StorageStack(
        load_portfolio(paths["portfolio"]),
        load_trace_library(paths["demand_years"]),
        load_trace_library(paths["wind_years"]),
        load_fleet(paths["fleet"]),
        tuple(cfg.stack),
    )
    return stack, list(paths.values())


def build_model_stack(cfg: ExperimentConfig) -> tuple:
    """Instantiate the configured stack; returns (ModelStack, data files)."""
    if cfg.study == "composite":
        stack, files = _composite_stack(cfg)
    else:
        stack, files = _storage_stack(cfg)
    model = ModelStack(stack, use_analytic_level0=cfg.estimator == "mlmc_expectation")
    return model, files


def run_experiment(cfg: ExperimentConfig, out_dir=None, progress=None) -> dict:
    """Run one configured experiment and write its output files.

    Returns the results record (also written to ``results.json`` along with
    ``levels.csv`` and ``report.txt`` in the output directory).
    """
    model, files = build_model_stack(cfg)
    result = run_controller(
        model,
        n0=cfg.n0,
        runs=cfg.runs,
        t_star=cfg.t_star,
        target_measure=cfg.target_measure,
        seed=cfg.seed,
        alpha=cfg.alpha,
        timing_mode=cfg.timing_mode,
        workers=cfg.workers,
        batch_cap=cfg.batch_cap,
        progress=progress,
    )
    versions = {"package": __version__, "data": data_hashes(files)}
    record = build_record(result, cfg.echo(), cfg.label, versions)
    write_record(record, out_dir if out_dir is not None else cfg.output_dir)
    return record
