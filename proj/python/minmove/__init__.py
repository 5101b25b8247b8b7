"""Minimizing Movements gradient flows: Banach and 1D Wasserstein backends."""

from ._minmove import (
    SCHEMA_VERSION,
    Backend,
    ConfigError,
    DomainError,
    InputError,
    InvariantError,
    SolverError,
    banach_backend,
    gaussian_quantiles,
    gibbs_quantiles,
    mm_step,
    normal_quantile,
    run,
    run_scenario,
    wasserstein_backend,
    wp_distance,
)

__all__ = [
    "SCHEMA_VERSION",
    "Backend",
    "ConfigError",
    "DomainError",
    "InputError",
    "InvariantError",
    "SolverError",
    "banach_backend",
    "gaussian_quantiles",
    "gibbs_quantiles",
    "mm_step",
    "normal_quantile",
    "run",
    "run_scenario",
    "wasserstein_backend",
    "wp_distance",
]
