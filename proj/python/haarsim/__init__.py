"""Haar wavelet collocation solver for the degenerate bidomain equations."""

from ._core import (
    AssemblyError,
    ConfigError,
    DomainError,
    HaarBasis,
    NumericalError,
    StepError,
    coefficient_decay_slope,
    collocation_points,
    eval_haar,
    eval_integral,
    gmres,
    normalize_config,
    operator_matrices,
    presets,
    project,
    run,
    simulate,
)

__all__ = [
    "AssemblyError",
    "ConfigError",
    "DomainError",
    "HaarBasis",
    "NumericalError",
    "StepError",
    "coefficient_decay_slope",
    "collocation_points",
    "eval_haar",
    "eval_integral",
    "gmres",
    "normalize_config",
    "operator_matrices",
    "presets",
    "project",
    "run",
    "simulate",
]
