"""Experiment orchestration: configs, the end-to-end pipeline, sweeps and figures."""

from .config import ConfigErrors, ExperimentConfig, SweepSpec, load_config, parse_config
from .pipeline import PipelineReport, RealEnvironment, aggregate, run_pipeline
from .render import render_heatmap
from .sweep import SweepTable, exploration_stats, read_table, run_sweep

__all__ = [
    "ConfigErrors",
    "ExperimentConfig",
    "PipelineReport",
    "RealEnvironment",
    "SweepSpec",
    "SweepTable",
    "aggregate",
    "exploration_stats",
    "load_config",
    "parse_config",
    "read_table",
    "render_heatmap",
    "run_pipeline",
    "run_sweep",
]
