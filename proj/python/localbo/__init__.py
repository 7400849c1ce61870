"""Local Bayesian optimization: GP models, acquisition functions and a benchmark harness."""

from ._core import (
    ConfigError,
    DimensionError,
    DomainError,
    GpModel,
    InvalidArgument,
    Kernel,
    NumericalBreakdown,
    alpha_trace,
    fig1,
    fig1_csv,
    fit,
    run_experiment,
    run_replication,
    summarize,
    summary_csv,
)

__all__ = [
    "ConfigError",
    "DimensionError",
    "DomainError",
    "GpModel",
    "InvalidArgument",
    "Kernel",
    "NumericalBreakdown",
    "alpha_trace",
    "fig1",
    "fig1_csv",
    "fit",
    "run_experiment",
    "run_replication",
    "summarize",
    "summary_csv",
]
