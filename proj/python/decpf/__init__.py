"""Python bindings for the decpf core library."""

from ._core import (
    RETURNS_HEADER,
    InvalidArgument,
    accumulated_error,
    eta_error,
    exact_update,
    hoeffding,
    particle_update,
    resolve_config,
    returns_csv,
    run_experiment,
    run_seed,
    smartgrid_reward,
    solve_baseline,
)

__all__ = [
    "RETURNS_HEADER",
    "InvalidArgument",
    "accumulated_error",
    "eta_error",
    "exact_update",
    "hoeffding",
    "particle_update",
    "resolve_config",
    "returns_csv",
    "run_experiment",
    "run_seed",
    "smartgrid_reward",
    "solve_baseline",
]
