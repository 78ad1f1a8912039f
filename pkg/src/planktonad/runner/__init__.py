"""Configuration, orchestration, tables, plots and the command-line interface."""

from planktonad.runner.config import ExperimentConfig, load_config
from planktonad.runner.pipeline import (
    Combination,
    GridResult,
    PreparedData,
    config_combinations,
    enumerate_combinations,
    load_grid_result,
    prepare_data,
    run_experiment,
    run_grid,
)
from planktonad.runner.plots import render_plots
from planktonad.runner.tables import Table, TableStyle, export_tables

__all__ = [
    "ExperimentConfig", "load_config", "Combination", "GridResult", "PreparedData", "config_combinations",
    "enumerate_combinations", "load_grid_result", "prepare_data", "run_experiment", "run_grid",
    "render_plots", "Table", "TableStyle", "export_tables",
]
