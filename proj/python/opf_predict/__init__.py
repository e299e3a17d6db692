"""Online prediction with forgetting for partially observed linear systems."""

from ._core import (
    ConfigError,
    NumericalError,
    OpfError,
    OpfParams,
    ParameterError,
    SteadyFilter,
    StructuralError,
    SystemModel,
    UsageError,
    builtin_names,
    builtin_text,
    epoch_schedule,
    kalman_predictions,
    regret_series,
    run_experiment,
    run_opf,
    run_uniform_forgetting,
    simulate,
    solve_dare,
    spectral_radius_closed_loop,
)

__all__ = [
    "ConfigError",
    "NumericalError",
    "OpfError",
    "OpfParams",
    "ParameterError",
    "SteadyFilter",
    "StructuralError",
    "SystemModel",
    "UsageError",
    "builtin_names",
    "builtin_text",
    "epoch_schedule",
    "kalman_predictions",
    "regret_series",
    "run_experiment",
    "run_opf",
    "run_uniform_forgetting",
    "simulate",
    "solve_dare",
    "spectral_radius_closed_loop",
]
